class QnmGainError(Exception):
    """ Base class for every error raised by qnmgain """


class ScenarioError(QnmGainError):
    """ Exception where a scenario or rate table fails validation """

    def __init__(self, key_path, message):
        self.key_path = key_path
        super().__init__(f"{key_path}: {message}" if key_path else message)


class EmitterIndexError(QnmGainError, ValueError):
    """ Exception where an emitter id is outside 0..n-1 """


class SymmetryError(QnmGainError):
    """ Exception where a symmetric-diagonal formula receives asymmetric rates """


class GainPresentError(QnmGainError):
    """ Exception where a no-gain closed form is requested with gain or pump """


class PhysicsRegimeError(QnmGainError):
    """ Exception where the master equation leaves the linear, stable regime """


class UnstableLiouvillianError(PhysicsRegimeError):
    """ Exception where the generator has an eigenvalue with positive real part """


class DegenerateSteadyStateError(PhysicsRegimeError):
    """ Exception where the steady state is not unique """


class IntegrationError(QnmGainError):
    """ Exception where the ODE integrator aborts """


class CalibrationError(QnmGainError):
    """ Exception where calibration anchors cannot be met by a single scale """

    def __init__(self, message, residuals):
        self.residuals = residuals
        super().__init__(f"{message} (relative residuals: {residuals})")


class MissingDetectorError(QnmGainError):
    """ Exception where a detector mode amplitude is missing """


class RateMatrixWarning(UserWarning):
    """ Warning where a rate matrix is not positive semidefinite """


class PositivityWarning(UserWarning):
    """ Warning where an evolved density matrix loses positivity """
