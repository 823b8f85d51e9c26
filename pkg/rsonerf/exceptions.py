class RsoNerfError(Exception):
    """
    Base class for all errors raised by this package.
    """


class ContractError(RsoNerfError, ValueError):
    """
    A precondition of an operation was violated.
    """


class DimensionError(ContractError):
    """
    Operand shapes do not agree.
    """

    def __init__(self, op, *shapes):
        self.op = op
        self.shapes = shapes
        super().__init__("%s: incompatible shapes %s" % (op, " and ".join(str(tuple(s)) for s in shapes)))


class ManifestError(RsoNerfError):
    """
    A dataset manifest is missing a key or is otherwise malformed.
    """

    def __init__(self, message, field=None):
        self.field = field
        super().__init__(message)


class PoseValidationError(ManifestError):
    """
    One or more camera transforms are not rigid.
    """

    def __init__(self, frames):
        self.frames = list(frames)
        listing = ", ".join("%s (%s)" % (name, reason) for name, reason in self.frames)
        super().__init__("Non-rigid transform in frame(s): %s" % listing, field="transform_matrix")


class NonFiniteLoss(RsoNerfError, ArithmeticError):
    """
    Training produced a NaN or infinite loss.
    """

    def __init__(self, step, learning_rate, max_sigma):
        self.step = step
        self.learning_rate = learning_rate
        self.max_sigma = max_sigma
        super().__init__("Non-finite loss at step %d (lr=%.3g, max sigma=%.3g)" % (step, learning_rate, max_sigma))
