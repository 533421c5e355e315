"""Exception types raised across the package."""


class ContractViolation(ValueError):
    """An operation was called with arguments outside its documented contract."""


class NonFiniteError(ArithmeticError):
    """A NaN or Inf appeared where finite values are required."""

    def __init__(self, op, detail=""):
        self.op = op
        msg = f"non-finite value produced by '{op}'"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class InternalConsistencyError(RuntimeError):
    """A numerical self-check failed (e.g. an inverse FFT that should be real is not)."""


class CheckpointFormatError(ValueError):
    pass


class ConfigIncompatibleError(ValueError):
    def __init__(self, missing, extra):
        self.missing = sorted(missing)
        self.extra = sorted(extra)
        parts = []
        if self.missing:
            parts.append("missing=" + ",".join(self.missing))
        if self.extra:
            parts.append("extra=" + ",".join(self.extra))
        super().__init__("checkpoint does not match model config: " + " ".join(parts))


class ManifestError(FileNotFoundError):
    pass


class ImageDecodeError(ValueError):
    def __init__(self, path, reason):
        self.path = str(path)
        super().__init__(f"cannot decode image {self.path}: {reason}")


class ConfigError(ValueError):
    pass
