class ErgolabError(Exception):
    exit_code = 1

    def __init__(self, message=""):
        self.message = message
        super().__init__(self.message)


class DimensionError(ErgolabError):
    pass


class InputValidationError(ErgolabError):
    pass


class InsufficientDataError(ErgolabError):
    pass


class ReturnTimeOverflowError(ErgolabError):
    pass


class HypothesisViolationError(ErgolabError):
    pass


class ParameterError(ErgolabError):
    pass


class ConsistencyError(ErgolabError):
    pass


class PreconditionRefusedError(ErgolabError):
    exit_code = 2
