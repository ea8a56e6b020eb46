"""Exception types raised across the toolkit.

Everything derives from :class:`LogoSynthError` so callers can catch the
whole family with one clause; the CLI maps these to exit code 2.
"""


class LogoSynthError(Exception):
    """Base class for all toolkit errors."""


# --- exemplar / raster input errors -----------------------------------------

class DecodeError(LogoSynthError):
    """An image file could not be read or decoded."""


class NoAlphaError(LogoSynthError):
    """An exemplar image has no alpha channel."""


class EmptyLogoError(LogoSynthError):
    """No pixel exceeds the opacity threshold."""


class DuplicateClassError(LogoSynthError):
    """Two exemplar files resolve to the same class name."""


# --- geometry errors ---------------------------------------------------------

class NonPositiveScaleError(LogoSynthError):
    """Scale factors must be strictly positive."""


class SingularShearError(LogoSynthError):
    """Shear coefficients with kx*ky = 1 collapse the plane."""


class SingularMapError(LogoSynthError):
    """A planar map is not invertible."""


class BackFacingError(LogoSynthError):
    """A tilted plane point projects behind the camera (w <= 0)."""


# --- synthesis errors --------------------------------------------------------

class OutOfBoundsError(LogoSynthError):
    """A placed logo box does not lie fully inside the context image."""


class DoesNotFitError(LogoSynthError):
    """The logo hull is larger than the context; no placement exists."""


class GenerationFailedError(LogoSynthError):
    """A record could not be generated within the retry budget."""

    def __init__(self, class_name: str, seed: int, attempts: int):
        self.class_name = class_name
        self.seed = seed
        self.attempts = attempts
        super().__init__(
            f"could not fit logo {class_name!r} after {attempts} attempts (seed {seed})"
        )


# --- dataset / plan / eval errors --------------------------------------------

class SchemaError(LogoSynthError):
    """A manifest, annotation, or prediction file violates its schema."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UnknownClassError(LogoSynthError):
    """An annotation references a class missing from the manifest class list."""


class InsufficientImagesError(LogoSynthError):
    """A class has too few images for the requested split."""

    def __init__(self, class_name: str, have: int, need: int):
        self.class_name = class_name
        self.have = have
        self.need = need
        super().__init__(
            f"class {class_name!r} has {have} images, needs more than {need}"
        )


class MissingManifestError(LogoSynthError):
    """A training plan requires a manifest that was not supplied."""


class ClassMismatchError(LogoSynthError):
    """A prediction names a class absent from the ground-truth class list."""
