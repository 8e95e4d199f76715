from civmon.store.blobs import BlobStore, DiskBlobStore, StoredBlob, digest_of
from civmon.store.dossiers import (
    DEFAULT_MEDIA_TYPES,
    EVENT_DOCUMENT_TYPES,
    DocumentUpload,
    DossierStore,
    TimelineEntry,
    TimelineKind,
)
from civmon.store.enterprise import EnterpriseStore, RegistrationRequest, RegistrationStatus

__all__ = [name for name in dir() if not name.startswith("_")]
