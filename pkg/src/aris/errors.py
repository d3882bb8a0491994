"""Exception hierarchy shared across the harness."""

from __future__ import annotations


class ArisError(Exception):
    """Base class for every error raised by the harness."""


# -- skills -----------------------------------------------------------------


class SkillError(ArisError):
    pass


class MissingFrontmatter(SkillError):
    pass


class MalformedFrontmatter(SkillError):
    pass


class MissingField(SkillError):
    def __init__(self, field: str, path: str | None = None):
        self.field = field
        where = f" in {path}" if path else ""
        super().__init__(f"frontmatter is missing required field {field!r}{where}")


class SkillNotFound(SkillError):
    pass


class DuplicateSkill(SkillError):
    pass


class UnknownReference(SkillError):
    pass


class DanglingSkillReference(SkillError):
    pass


# -- artifact store ---------------------------------------------------------


class StoreError(ArisError):
    pass


class IoFailure(StoreError):
    pass


class NotFound(StoreError):
    pass


class VersionNotFound(StoreError):
    pass


class UnknownRun(StoreError):
    pass


class CorruptCheckpoint(StoreError):
    pass


class WriterLockHeld(StoreError):
    pass


# -- wiki -------------------------------------------------------------------


class WikiError(ArisError):
    pass


class DuplicateId(WikiError):
    pass


class UnknownEndpoint(WikiError):
    pass


class UnknownRelation(WikiError):
    pass


class DuplicateEdge(WikiError):
    pass


class UnknownNode(WikiError):
    pass


class NotAClaim(WikiError):
    pass


class InvalidStatus(WikiError):
    pass


# -- bridges ----------------------------------------------------------------


class BridgeFailure(ArisError):
    """Any failure talking to a model bridge."""


class AuthMissing(BridgeFailure):
    pass


class BridgeTimeout(BridgeFailure):
    pass


class ProviderError(BridgeFailure):
    def __init__(self, status: int, detail: str = ""):
        self.status = status
        super().__init__(f"provider returned HTTP {status}: {detail[:200]}")


class ScriptExhausted(BridgeFailure):
    pass


class NetworkDisabled(BridgeFailure):
    pass


class UnknownRoute(ArisError):
    pass


class UnknownBridge(ArisError):
    pass


# -- review -----------------------------------------------------------------


class ReviewError(ArisError):
    pass


class ScopeViolation(ReviewError):
    pass


class ArtifactPathMissing(ReviewError):
    pass


class UnparseableReview(ReviewError):
    pass


class UnknownErrorClass(ReviewError):
    pass


class PolicyUnsatisfiable(ReviewError):
    def __init__(self, message: str, attempts: list | None = None):
        self.attempts = attempts or []
        super().__init__(message)


# -- assurance --------------------------------------------------------------


class AssuranceError(ArisError):
    pass


class UnparseableFindings(AssuranceError):
    pass


class MissingEvidenceRef(AssuranceError):
    pass


class UnknownCategory(AssuranceError):
    pass


# -- orchestration ----------------------------------------------------------


class WorkflowError(ArisError):
    pass


class UnknownWorkflow(WorkflowError):
    pass


class InvalidValue(WorkflowError):
    pass


class ContractViolation(WorkflowError):
    def __init__(self, violations: list):
        self.violations = violations
        lines = "; ".join(str(v) for v in violations)
        super().__init__(f"artifact contract violations: {lines}")


class StepFailed(WorkflowError):
    def __init__(self, step: str, reason: str, summary=None):
        self.step = step
        self.summary = summary
        super().__init__(f"step {step!r} failed: {reason}")


class GateDeclined(WorkflowError):
    def __init__(self, step: str, summary=None):
        self.step = step
        self.summary = summary
        super().__init__(f"approval declined before step {step!r}")


class SafetyGateFailed(GateDeclined):
    """A named safety gate rejected the state before a step."""

    def __init__(self, step: str, gate: str, reason: str, summary=None):
        super().__init__(step, summary)
        self.gate = gate
        self.reason = reason
        self.args = (f"safety gate {gate!r} failed before step {step!r}: {reason}",)


class PendingApproval(WorkflowError):
    def __init__(self, step: str, kind: str, summary=None):
        self.step = step
        self.kind = kind
        self.summary = summary
        super().__init__(f"{kind} approval pending before step {step!r}")


class RunInterrupted(WorkflowError):
    """Raised by the runner's halt hook; the checkpoint is already on disk."""

    def __init__(self, run_id: str, step_index: int):
        self.run_id = run_id
        self.step_index = step_index
        super().__init__(f"run {run_id} halted after step {step_index}")


# -- figures ----------------------------------------------------------------


class FigureError(ArisError):
    pass


class DegenerateDirection(FigureError):
    pass


# -- meta -------------------------------------------------------------------


class MetaError(ArisError):
    pass


class StaleTarget(MetaError):
    pass


class InvalidProposalState(MetaError):
    pass


class PatchApplyError(MetaError):
    pass


# -- cli --------------------------------------------------------------------


class CommandError(ArisError):
    pass


class UnknownVerb(CommandError):
    pass


class BadDirective(CommandError):
    pass
