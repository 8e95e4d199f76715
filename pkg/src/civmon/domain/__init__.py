from civmon.domain.catalogs import (
    Catalogs,
    CommunicationType,
    DocumentType,
    default_catalogs,
    load_catalogs,
    parse_catalog_file,
)
from civmon.domain.model import (
    AssociationKind,
    AuditEntry,
    CEMark,
    ClinicalInvestigation,
    Communication,
    CommDirection,
    ComparatorProduct,
    Component,
    DecisionOutcome,
    Delegation,
    DeviceVariant,
    Document,
    DocumentAssociation,
    Dossier,
    Drug,
    EvaluationReport,
    EvaluationTeam,
    FinalDecision,
    InvestigationalDevice,
    InvestigationalSite,
    MedicalDevice,
    Notification,
    Party,
    PartyKind,
    ReportBody,
    ReportKind,
    Role,
    SaeKind,
    SaeReport,
    SimilarityLink,
    StudyDesign,
    TeamMember,
    ValidationReport,
    Violation,
    Visibility,
    EXTERNAL_ROLES,
    INTERNAL_ROLES,
    link_similarity,
    new_clinical_investigation,
    validate_clinical_investigation,
    validate_device,
    validate_sae_set,
)

__all__ = [name for name in dir() if not name.startswith("_")]
