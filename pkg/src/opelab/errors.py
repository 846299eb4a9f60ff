"""Exception types raised across opelab."""


class OpelabError(Exception):
    """Base class; `code` is the machine-readable name used in CLI error JSON."""

    code = "OpelabError"

    def __init__(self, message="", **details):
        super().__init__(message)
        self.details = details


def _make(name, doc):
    return type(name, (OpelabError,), {"__doc__": doc, "code": name})


DimensionCap = _make("DimensionCap", "Basis enumeration would exceed the configured cap.")
DimMismatch = _make("DimMismatch", "Operator dimensions do not agree.")
NoConvergence = _make("NoConvergence", "Power iteration did not reach the requested tolerance.")
EmptyCap = _make("EmptyCap", "Field basis caps exclude the identity field.")
EmptyWindow = _make("EmptyWindow", "Energy/particle window contains no states.")
GramIllConditioned = _make("GramIllConditioned", "Dual construction is too ill-conditioned; grow the window.")
RankDeficient = _make("RankDeficient", "Fields are linearly dependent on the window.")
NotSpacelike = _make("NotSpacelike", "Point tuple is not pairwise spacelike.")
RadiusTooLarge = _make("RadiusTooLarge", "Approximant radius violates r < d(x - y) / 4.")
TooFewPointsInWindow = _make("TooFewPointsInWindow", "Fewer than four sequence points lie in the fit window.")
CandidateNotSpApp = _make("CandidateNotSpApp", "Candidate space is not spacelike approximating.")
RankAmbiguous = _make("RankAmbiguous", "A decay slope sits on the classification threshold.")
CoefficientVanishes = _make("CoefficientVanishes", "Target coefficient falls below the floor.")
KernelThresholdAmbiguous = _make("KernelThresholdAmbiguous", "Singular values straddle the kernel threshold.")
CandidateNotClosed = _make("CandidateNotClosed", "Candidate basis is not closed under the transformation.")
VerdictUnstable = _make("VerdictUnstable", "Spacelike-approximation verdict depends on the dual window.")
ConfigError = _make("ConfigError", "Malformed configuration file.")
