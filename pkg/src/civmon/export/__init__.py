from civmon.export.archival import (
    ArchivalDocument,
    HmacSigner,
    Signature,
    Signer,
    render_archival,
    verify_archival,
)
from civmon.export.extract import RegistryExtract, registry_extract
from civmon.export.vocab import VocabularyEntry, VocabularyIndex
from civmon.export.xml_io import (
    export_dossier,
    import_dossier,
    load_schema,
    validate_against_schema,
)

__all__ = [name for name in dir() if not name.startswith("_")]
