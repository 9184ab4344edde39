"""Exception types shared across the package."""


class ContractError(ValueError):
    """An input violates an operation's precondition."""


class DecompositionError(ArithmeticError):
    """A matrix decomposition failed to converge."""

    def __init__(self, kind: str, shape: tuple[int, ...]):
        self.kind = kind
        self.shape = tuple(shape)
        dims = "x".join(str(s) for s in self.shape)
        super().__init__(f"{kind} failed to converge for a {dims} matrix")


class DivergenceError(ArithmeticError):
    """A message-passing iteration produced NaN or Inf."""

    def __init__(self, iteration: int, where: str = ""):
        self.iteration = int(iteration)
        self.where = where
        msg = f"non-finite values at iteration {self.iteration}"
        if where:
            msg += f" ({where})"
        super().__init__(msg)


class ConfigError(ValueError):
    """An experiment configuration is malformed."""


class MajorityDivergenceError(RuntimeError):
    """More than half of the trials at one SNR point diverged."""

    def __init__(self, snr_db: float, mode: str, diverged: int, trials: int):
        self.snr_db = snr_db
        self.mode = mode
        self.diverged = diverged
        self.trials = trials
        super().__init__(
            f"{diverged}/{trials} trials diverged at {snr_db} dB in mode {mode}"
        )
