import logging
from typing import Callable, Dict, List

from .exception import FormFunctionException, SpecFileException
from .form import DiffusionSpec, FormFunction
from .measure import INF, CantorCopy, Interval, LebesgueDensity, RadonMeasure, RationalWindows
from .scale import ScaleFunction

log = logging.getLogger(__name__)


def brownian_line() -> DiffusionSpec:
    """
    Standard Brownian motion (generator ½Δ) on the real line.
    """
    interval = Interval.real_line()
    return DiffusionSpec(interval, ScaleFunction.identity(interval), RadonMeasure.lebesgue(), name="brownian_line")


def brownian_01() -> DiffusionSpec:
    """
    Reflecting Brownian motion on [0, 1], the form (H¹([0,1]), ½D).
    """
    interval = Interval.closed(0.0, 1.0)
    return DiffusionSpec(
        interval, ScaleFunction.identity(interval), RadonMeasure.lebesgue(0.0, 1.0), name="brownian_01"
    )


def cantor_scale() -> DiffusionSpec:
    """
    Scale s(x) = x + c(x) on [0, 1] with c the standard Cantor function, speed dx.
    Brownian motion on [0, 1] is a proper regular subspace of it.
    """
    interval = Interval.closed(0.0, 1.0)
    ds = RadonMeasure.of(
        LebesgueDensity((0.0, 1.0), (1.0, )),
        CantorCopy(Interval.closed(0.0, 1.0), 1.0),
    )
    scale = ScaleFunction(interval, 0.0, 0.0, ds)
    return DiffusionSpec(interval, scale, RadonMeasure.lebesgue(0.0, 1.0), name="cantor_scale")


def rational_windows() -> DiffusionSpec:
    """
    Scale s(x) = ∫_0^x 1_G(y)dy on (0, ∞), G the union of shrinking windows around the positive rationals.
    s stays bounded by the total window length, so the right endpoint is reached in finite time.
    """
    interval = Interval.open(0.0, INF)
    scale = ScaleFunction(interval, 0.0, 0.0, RadonMeasure.of(RationalWindows()))
    return DiffusionSpec(interval, scale, RadonMeasure.lebesgue(0.0, INF), name="rational_windows")


def rational_windows_signed() -> DiffusionSpec:
    """
    The same construction on the whole line, with windows around ±r alternating.
    """
    interval = Interval.real_line()
    scale = ScaleFunction(interval, 0.0, 0.0, RadonMeasure.of(RationalWindows(signed=True)))
    return DiffusionSpec(interval, scale, RadonMeasure.lebesgue(), name="rational_windows_signed")


NAMED_EXAMPLES: Dict[str, Callable[[], DiffusionSpec]] = {
    "brownian_line": brownian_line,
    "brownian_01": brownian_01,
    "cantor_scale": cantor_scale,
    "rational_windows": rational_windows,
    "rational_windows_signed": rational_windows_signed,
}


def example_names() -> List[str]:
    return list(NAMED_EXAMPLES.keys())


def build_named_example(name: str, signed: bool = False) -> DiffusionSpec:
    """
    Build one of the named diffusions. `signed` selects the whole-line variant of rational_windows.

    Raises:
        SpecFileException for an unknown name.
    """
    if signed:
        if name != "rational_windows":
            raise SpecFileException("", f"only rational_windows has a signed variant, not '{name}'")
        name = "rational_windows_signed"

    builder = NAMED_EXAMPLES.get(name)
    if builder is None:
        raise SpecFileException("", f"unknown example '{name}' (known: {', '.join(NAMED_EXAMPLES)})")

    log.debug(f"Building named example {name}")
    return builder()


def named_function(scale: ScaleFunction, text: str) -> FormFunction:
    """
    Form functions by name: "scale" (u = s), "component:<i>" (the cumulative of ds component i)
    and "constant:<value>".
    """
    kind, _, argument = text.partition(":")
    if kind == "scale" and not argument:
        return FormFunction.of_scale(scale)

    if kind == "component":
        try:
            index = int(argument)
        except ValueError:
            raise FormFunctionException(f"'{argument}' is not a component index")
        if not 0 <= index < len(scale.ds):
            raise FormFunctionException(f"scale has {len(scale.ds)} components, no component {index}")
        return FormFunction.component_indicator(scale, index)

    if kind == "constant":
        try:
            return FormFunction.constant(scale, float(argument))
        except ValueError:
            raise FormFunctionException(f"'{argument}' is not a number")

    raise FormFunctionException(f"unknown named function '{text}' (use scale, component:<i> or constant:<value>)")
