"""Exception types shared across the library."""


class LesionFlowError(Exception):
    """Base class for every error raised by lesionflow."""


# --- imaging ---

class CropTooLarge(LesionFlowError):
    """Requested crop window exceeds the image bounds."""


# --- manifests / sampling ---

class BadHeader(LesionFlowError):
    """CSV header does not match the expected column layout."""


class NotOneHot(LesionFlowError):
    """Ground-truth row does not encode exactly one class."""


class DuplicateId(LesionFlowError):
    """The same image id appears more than once."""


class ZeroClassCount(LesionFlowError):
    """A weight mode would divide by a zero class count."""


class NoSamples(LesionFlowError):
    """No samples available to build batches from."""


# --- neural network ---

class ShapeMismatch(LesionFlowError):
    """Array shapes do not chain through the model."""


class NonFiniteInput(LesionFlowError):
    """Input contains NaN or infinity."""


class EmptyTraining(LesionFlowError):
    """Training was requested but no epoch can run."""


class MissingImageFile(LesionFlowError):
    """An image referenced by a manifest cannot be found on disk."""


class CorruptCheckpoint(LesionFlowError):
    """Checkpoint bytes fail the magic/version/length checks."""


# --- metrics ---

class LengthMismatch(LesionFlowError):
    """Paired label arrays differ in length."""


class EmptyInput(LesionFlowError):
    """An operation that needs at least one element received none."""


# --- ensembling ---

class IdMismatch(LesionFlowError):
    """Prediction sets do not cover the same image ids."""


class NotNormalized(LesionFlowError):
    """A probability row is too far from summing to one."""


class BadRow(LesionFlowError):
    """A prediction CSV row is malformed."""
