"""
Coefficient fields (t, x) -> values, with named presets.

A scalar field maps a time `t` and a batch of points `x` of
shape (N, d) to an array of shape (N,). Array-valued fields
(vectors b, g, nu and matrices a) are nested collections of
scalar fields and return (N,) + shape.

Presets serialize to plain dicts, so stencils and problems built
from them can be written to and read from run configs:

    {"kind": "constant", "value": 2.0}
    {"kind": "trig", "offset": 0.5, "amplitude": 0.25, "wavevector": [1], ...}
    {"kind": "polynomial", "offset": 0.0, "scale": 1.0, "s": 2.0}
    {"kind": "trigpoly", "period": 1.0, "constant": 0.0, "modes": [...]}

Numbers are shorthand for constant fields; lists are array fields.
"""
import numpy as np

from spde_richardson.exceptions import ConfigError
from spde_richardson.utils import as_points


class ScalarField:
    # Subclasses implement evaluate(t, x) and to_dict().
    kind = None
    time_dependent = False

    def __call__(self, t, x):
        x = as_points(x)
        return np.broadcast_to(
            np.asarray(self.evaluate(t, x), dtype=float), (x.shape[0],)
        ).copy()

    def evaluate(self, t, x):
        raise NotImplementedError

    def to_dict(self):
        raise NotImplementedError

    def __repr__(self):
        return f"<{type(self).__name__}: {self.to_dict()}>"


class ConstantField(ScalarField):
    kind = "constant"

    def __init__(self, value):
        self.value = float(value)

    def evaluate(self, t, x):
        return np.full(x.shape[0], self.value)

    def to_dict(self):
        return {"kind": self.kind, "value": self.value}


class TrigField(ScalarField):
    """
    offset + amplitude * fn(2 pi k.x / period + phase), fn in {sin, cos}.
    Integer wavevectors give exactly periodic fields on the torus.
    """

    kind = "trig"

    def __init__(
        self, offset=0.0, amplitude=1.0, wavevector=(1,), phase=0.0, period=1.0,
        function="sin",
    ):
        if function not in ("sin", "cos"):
            raise ConfigError(f"Unknown trigonometric function '{function}'.")
        self.offset = float(offset)
        self.amplitude = float(amplitude)
        self.wavevector = tuple(int(k) for k in wavevector)
        self.phase = float(phase)
        self.period = float(period)
        self.function = function

    def evaluate(self, t, x):
        arg = 2 * np.pi * (x @ np.asarray(self.wavevector, dtype=float)) / self.period
        fn = np.sin if self.function == "sin" else np.cos
        return self.offset + self.amplitude * fn(arg + self.phase)

    def to_dict(self):
        return {
            "kind": self.kind,
            "offset": self.offset,
            "amplitude": self.amplitude,
            "wavevector": list(self.wavevector),
            "phase": self.phase,
            "period": self.period,
            "function": self.function,
        }


class PolynomialGrowthField(ScalarField):
    """offset + scale * (1 + |x|^2)^(s/2)"""

    kind = "polynomial"

    def __init__(self, offset=0.0, scale=1.0, s=2.0):
        self.offset = float(offset)
        self.scale = float(scale)
        self.s = float(s)

    def evaluate(self, t, x):
        return self.offset + self.scale * (1.0 + np.sum(x**2, axis=1)) ** (self.s / 2)

    def to_dict(self):
        return {"kind": self.kind, "offset": self.offset, "scale": self.scale, "s": self.s}


class TrigPolynomial(ScalarField):
    """
    A finite Fourier sum on the torus [0, period)^d:

        constant + sum_m amplitude_m * fn_m(2 pi k_m.x / period)

    The attributes of TrigPolynomial are:

    trig.constant (float):
        The zero mode.
    trig.modes (list of tuple):
        (amplitude, wavevector, function) per mode, where the
        wavevector is a tuple of integers and the function is
        "sin" or "cos".
    trig.period (float):
        The torus period L.
    """

    kind = "trigpoly"

    def __init__(self, modes=(), constant=0.0, period=1.0):
        self.constant = float(constant)
        self.period = float(period)
        self.modes = []
        for mode in modes:
            if isinstance(mode, dict):
                mode = (mode["amplitude"], mode["wavevector"], mode.get("function", "sin"))
            amplitude, wavevector, function = mode
            if function not in ("sin", "cos"):
                raise ConfigError(f"Unknown trigonometric function '{function}'.")
            self.modes.append(
                (float(amplitude), tuple(int(k) for k in wavevector), function)
            )

    @property
    def d(self):
        if not self.modes:
            return None
        return len(self.modes[0][1])

    def evaluate(self, t, x):
        out = np.full(x.shape[0], self.constant)
        for amplitude, wavevector, function in self.modes:
            arg = 2 * np.pi * (x @ np.asarray(wavevector, dtype=float)) / self.period
            fn = np.sin if function == "sin" else np.cos
            out = out + amplitude * fn(arg)
        return out

    def to_dict(self):
        return {
            "kind": self.kind,
            "period": self.period,
            "constant": self.constant,
            "modes": [
                {"amplitude": a, "wavevector": list(k), "function": fn}
                for a, k, fn in self.modes
            ],
        }


class ArrayField:
    """
    A vector or matrix of scalar fields, evaluated to (N,) + shape.
    """

    def __init__(self, entries):
        entries = np.asarray(entries, dtype=object)
        self.shape = entries.shape
        self.entries = np.empty(self.shape, dtype=object)
        for index in np.ndindex(self.shape):
            self.entries[index] = parse_field(entries[index])

    @property
    def time_dependent(self):
        return any(
            getattr(entry, "time_dependent", True) for entry in self.entries.flat
        )

    def __call__(self, t, x):
        x = as_points(x)
        out = np.empty((x.shape[0],) + self.shape)
        for index in np.ndindex(self.shape):
            out[(slice(None),) + index] = self.entries[index](t, x)
        return out

    def to_dict(self):
        return np.vectorize(field_to_dict, otypes=[object])(self.entries).tolist()

    def __repr__(self):
        return f"<ArrayField: shape={self.shape}>"


class CallableField:
    """Wraps a user callable (t, x) -> array. Not serializable."""

    time_dependent = True

    def __init__(self, function, time_dependent=True):
        self.function = function
        self.time_dependent = time_dependent

    def __call__(self, t, x):
        return np.asarray(self.function(t, as_points(x)), dtype=float)

    def to_dict(self):
        raise ConfigError(
            f"Field {self.function!r} is a plain callable and cannot be serialized."
        )


PRESETS = {
    ConstantField.kind: ConstantField,
    TrigField.kind: TrigField,
    PolynomialGrowthField.kind: PolynomialGrowthField,
    TrigPolynomial.kind: TrigPolynomial,
}


def parse_field(obj):
    """
    Build a field from its config representation.

    Parameters
    ----------
    obj: number, dict, list, field or callable
        Numbers give constant fields, dicts name a preset via
        their "kind" key, lists give array fields. Fields are
        returned unchanged and other callables are wrapped.
    """
    if isinstance(obj, (ScalarField, ArrayField, CallableField)):
        return obj
    if isinstance(obj, (int, float, np.integer, np.floating)):
        return ConstantField(obj)
    if isinstance(obj, dict):
        params = dict(obj)
        kind = params.pop("kind", None)
        if kind not in PRESETS:
            raise ConfigError(
                f"Unknown field preset '{kind}'. Use one of {sorted(PRESETS)}."
            )
        try:
            return PRESETS[kind](**params)
        except TypeError as e:
            raise ConfigError(f"Invalid parameters for field '{kind}': {e}") from e
    if isinstance(obj, (list, tuple, np.ndarray)):
        return ArrayField(obj)
    if callable(obj):
        return CallableField(obj)
    raise ConfigError(f"Cannot interpret {obj!r} as a coefficient field.")


def field_to_dict(field):
    """Inverse of parse_field for serializable fields."""
    if isinstance(field, ConstantField):
        return field.value
    return field.to_dict()


def is_time_independent(*fields):
    return not any(getattr(f, "time_dependent", True) for f in fields if f is not None)


def evaluate_field(field, t, x, shape=()):
    """
    Evaluate `field` on the points `x` and broadcast to (N,) + shape.

    A scalar value given for a square matrix shape is read as a
    multiple of the identity; for any other shape it fills every
    component. A missing field (None) evaluates to zero.
    """
    x = as_points(x)
    n = x.shape[0]
    shape = tuple(shape)
    if field is None:
        return np.zeros((n,) + shape)
    value = np.asarray(field(t, x), dtype=float)
    if value.shape == (n,) + shape:
        return value
    if value.shape == (n,) and shape:
        if len(shape) == 2 and shape[0] == shape[1]:
            return value[:, None, None] * np.eye(shape[0])
        value = value.reshape((n,) + (1,) * len(shape))
    try:
        return np.broadcast_to(value, (n,) + shape).copy()
    except ValueError as e:
        raise ConfigError(
            f"Field {field!r} has shape {value.shape[1:]}, expected {shape}."
        ) from e
