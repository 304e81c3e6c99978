__all__ = [
    "DimEstError",
    "InputValidationError",
    "ArgumentError",
    "AeConfigError",
    "NumericError",
    "DegenerateSpectrumError",
    "DisconnectedGraphError",
    "TrainingDivergenceError",
    "DataFormatError",
]


class DimEstError(Exception):
    exit_code = 1

    def __init__(self, msg):
        super().__init__(msg)
        self._msg = msg

    def __str__(self):
        return f"{self._msg}"

    def __repr__(self):
        return f"{type(self).__name__}: {self._msg}"

    def __reduce__(self):
        # subclasses take other constructor arguments, so unpickle without calling __init__
        return _restore, (type(self), self._msg, self.__dict__)


def _restore(cls, msg, state):
    err = cls.__new__(cls)
    Exception.__init__(err, msg)
    err.__dict__.update(state)

    return err


class InputValidationError(DimEstError):
    exit_code = 2


class ArgumentError(DimEstError):
    exit_code = 2


class AeConfigError(ArgumentError):
    def __init__(self, field, msg):
        super().__init__(msg)
        self._field = field

    @property
    def field(self):
        return self._field

    def __str__(self):
        return f"Invalid autoencoder configuration '{self._field}': {self._msg}"


class NumericError(DimEstError):
    def __init__(self, msg, attempts):
        super().__init__(msg)
        self._attempts = attempts

    @property
    def attempts(self):
        return self._attempts

    def __str__(self):
        return f"{self._msg} (gave up after {self._attempts} solver attempts)"


class DegenerateSpectrumError(DimEstError):
    def __init__(self, msg="spectrum sums to zero"):
        super().__init__(msg)


class DisconnectedGraphError(DimEstError):
    def __init__(self, i, j):
        super().__init__(f"no path between samples {i} and {j}")
        self._pair = (i, j)

    @property
    def pair(self):
        return self._pair

    def __str__(self):
        return f"Neighbor graph is disconnected: {self._msg}"


class TrainingDivergenceError(DimEstError):
    def __init__(self, epoch, step):
        super().__init__("loss or parameters became non-finite")
        self._epoch = epoch
        self._step = step

    @property
    def epoch(self):
        return self._epoch

    @property
    def step(self):
        return self._step

    def __str__(self):
        return f"Training diverged at epoch {self._epoch}, step {self._step}: {self._msg}"


class DataFormatError(DimEstError):
    exit_code = 2

    def __init__(self, path, msg, offset=None, row=None):
        super().__init__(msg)
        self._path = path
        self._offset = offset
        self._row = row

    @property
    def offset(self):
        return self._offset

    @property
    def row(self):
        return self._row

    def __str__(self):
        where = ""
        if self._offset is not None:
            where = f" at byte offset {self._offset}"
        elif self._row is not None:
            where = f" in row {self._row}"

        return f"{self._path}{where}: {self._msg}"
