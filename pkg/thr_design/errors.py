"""Exception hierarchy. Every error carries the exit code the command-line
interface returns when it is raised out of a subcommand."""


class ThrDesignError(Exception):
    """Base class of all package errors."""
    exit_code = 2


class ValidationError(ThrDesignError):
    """Invalid user input or configuration."""
    exit_code = 1


class DomainError(ValidationError):
    """Physically invalid parameters (non-positive values, a_i >= r_i)."""


class NoPhysicalRootError(DomainError):
    """The neck-radius quadratic has a negative discriminant."""


class GeometryOutOfRangeError(DomainError):
    """Every admissible geometry lies outside the configured ranges."""


class InputFileError(ValidationError):
    """Malformed key/value input file."""

    def __init__(self, path: str, lineno: int or None, message: str) -> None:
        self.path = path
        self.lineno = lineno
        where = f"{path}:{lineno}" if lineno is not None else f"{path}"
        super().__init__(f"{where}: {message}")


class ShapeMismatchError(ValidationError):
    """Array shapes do not agree."""


class GridMismatchError(ValidationError):
    """A spectrum is not sampled on the grid the model was trained on."""


class ResonanceOutOfBandError(ThrDesignError):
    """Fewer than two resonances inside the analysed band."""

    def __init__(self, found: list[float], band: tuple[float, float]) -> None:
        self.found = list(found)
        self.band = tuple(band)
        super().__init__(
            f"resonances out of band: found {len(self.found)} resonance(s) "
            f"{[round(f, 4) for f in self.found]} in [{band[0]}, {band[1]}] Hz"
        )


class StaleCacheError(ThrDesignError):
    """Backward pass called with a cache the model no longer matches."""


class NonFiniteError(ThrDesignError):
    """Non-finite loss or gradient during training."""


class ModelFormatError(ThrDesignError):
    """Model file cannot be read."""


class VersionMismatchError(ModelFormatError):
    """Model file written with an unsupported format version."""

    def __init__(self, found, expected, path: str) -> None:
        self.found = found
        self.expected = expected
        self.path = path
        super().__init__(
            f"model format version mismatch in {path}: "
            f"file has {found}, this version reads {expected}"
        )


class ChecksumMismatchError(ModelFormatError):
    """Model payload does not match its stored checksum."""

    def __init__(self, expected: str, actual: str, path: str) -> None:
        self.expected = expected
        self.actual = actual
        self.path = path
        super().__init__(
            f"model file {path} failed its integrity check "
            f"(expected sha256 {expected}, got {actual}); the file may be truncated or corrupted"
        )


class NoRealizableDesignError(ThrDesignError):
    """Every candidate failed the EEP to geometry inversion."""

    def __init__(self, reasons: dict[int, str]) -> None:
        self.reasons = dict(reasons)
        super().__init__(
            f"no realizable design among {len(self.reasons)} candidates: "
            + "; ".join(f"#{i}: {r}" for i, r in sorted(self.reasons.items())[:3])
            + ("; ..." if len(self.reasons) > 3 else "")
        )


class NoFeasibleGroupsError(ValidationError):
    """Dataset generation filled no group at all."""


class CheckFailedError(ThrDesignError):
    """An invariant suite of the check subcommand failed."""
    exit_code = 3
