"""A quadrimodal knowledge store.

Entities live in four domains (Object, Event, Concept, Action) joined by
six functional correlations.  Every change is recorded in a hash-chained,
signed event log that can be replayed, audited, and traced per entity.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .access import (
    ACTION_TRACKER,
    BUILTIN_ROLES,
    EVENT_NOTARY,
    STEWARD,
    SYSTEM_ACTOR,
    Actor,
    Decision,
    OpClass,
    Permission,
    Role,
)
from .canonical import ZERO_DIGEST, digest, encode_record, utc
from .consent import AuditReport, ConsentReceipt, ConsentStatus, ProvenanceChain
from .errors import *  # noqa: F401,F403
from .eventlog import (
    EventLog,
    EventRecord,
    FailureKind,
    HmacSha256Signer,
    Keyring,
    StepClock,
    SystemClock,
    VerificationReport,
    verify_chain,
)
from .graphio import export_graph, import_graph
from .mapping import ConceptHierarchy, Mapping, MappingKind, classify_match, translate
from .model import (
    Correlation,
    CorrelationKind,
    CrossDomainClass,
    Domain,
    Entity,
    EntityId,
    classify_cross_domain,
    correlation_kind_for,
)
from .query import (
    BindingSet,
    CompetencyQuestion,
    CQRegistry,
    Expectation,
    Pattern,
    Var,
    evaluate_cqs,
    match_pattern,
    traverse,
)
from .snapshot import load_snapshot, save_snapshot
from .state import EntityState, State, View, replay
from .store import Store

__all__ = [
    "__version__",
    "ACTION_TRACKER",
    "Actor",
    "AlreadyRevoked",
    "AnchorExists",
    "AuditReport",
    "BUILTIN_ROLES",
    "BindingSet",
    "CQRegistry",
    "CdoError",
    "ClockRegression",
    "CompetencyQuestion",
    "ConceptHierarchy",
    "ConsentReceipt",
    "ConsentStatus",
    "Correlation",
    "CorrelationKind",
    "CorruptLog",
    "CorruptSnapshot",
    "CrossDomainClass",
    "CycleDetected",
    "Decision",
    "Domain",
    "DomainConflict",
    "DuplicateActor",
    "DuplicateEdge",
    "DuplicateId",
    "DuplicateMapping",
    "DuplicateName",
    "DuplicateRole",
    "EVENT_NOTARY",
    "EmptyScope",
    "Entity",
    "EntityId",
    "EntityInUse",
    "EntityState",
    "EventLog",
    "EventRecord",
    "Expectation",
    "FailureKind",
    "HmacSha256Signer",
    "ImportConflict",
    "InvalidId",
    "InvalidValue",
    "Keyring",
    "Mapping",
    "MappingKind",
    "MappingKindConflict",
    "MissingAnchor",
    "NeverExisted",
    "NoMatch",
    "NotMapped",
    "OpClass",
    "ParseError",
    "Pattern",
    "Permission",
    "ProvenanceChain",
    "Role",
    "STEWARD",
    "SYSTEM_ACTOR",
    "SameDomainPair",
    "State",
    "StepClock",
    "Store",
    "StoreIOError",
    "SystemClock",
    "Unauthorized",
    "UnboundedQuery",
    "UnknownActor",
    "UnknownEntity",
    "UnknownReceipt",
    "UnknownRole",
    "Var",
    "VerificationError",
    "VerificationReport",
    "View",
    "WrongDomain",
    "ZERO_DIGEST",
    "annotations",
    "classify_cross_domain",
    "classify_match",
    "correlation_kind_for",
    "digest",
    "encode_record",
    "evaluate_cqs",
    "export_graph",
    "import_graph",
    "load_snapshot",
    "match_pattern",
    "replay",
    "save_snapshot",
    "translate",
    "traverse",
    "utc",
    "verify_chain",
]
