"""Evidence-to-claim audits and manuscript assurance ledgers."""

from .citations import CitationCandidate, CitationEntry, audit_citations, parse_bibtex, recommend
from .claims import ClaimCandidate, ClaimLedger, ClaimRecord, map_result_to_claim, propagate_integrity, reviewer_judge
from .editing import EditingPassReport, run_editing_passes
from .integrity import CATEGORIES, IntegrityFinding, IntegrityReport, run_experiment_audit, status_of
from .numbers import delta_compare, numeric_compare, round_half_even
from .paper_audit import ClaimAuditEntry, audit_paper_claims
from .proofs import ProofLedger, ProofObligation, build_proof_ledger, load_taxonomy

__all__ = [
    "CATEGORIES",
    "CitationCandidate",
    "CitationEntry",
    "ClaimAuditEntry",
    "ClaimCandidate",
    "ClaimLedger",
    "ClaimRecord",
    "EditingPassReport",
    "IntegrityFinding",
    "IntegrityReport",
    "ProofLedger",
    "ProofObligation",
    "audit_citations",
    "audit_paper_claims",
    "build_proof_ledger",
    "delta_compare",
    "load_taxonomy",
    "map_result_to_claim",
    "numeric_compare",
    "parse_bibtex",
    "propagate_integrity",
    "recommend",
    "reviewer_judge",
    "round_half_even",
    "run_editing_passes",
    "run_experiment_audit",
    "status_of",
]
