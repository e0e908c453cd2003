class KcError(Exception):
    pass


class OracleCapError(KcError):
    pass


class UnassignedVariable(KcError):
    def __init__(self, var: int):
        super().__init__(f"variable {var} is unassigned")
        self.var = var


class DeterminismError(KcError):
    pass


class SizeLimitExceeded(KcError):
    pass
