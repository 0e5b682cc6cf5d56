import json
import logging
from typing import Any, Callable, Dict, List, Optional, Union

from .chain import FiniteChain, discretize
from .exception import DiffusionException, SpecFileException
from .form import DiffusionSpec, FormFunction, StepFunction
from .measure import (
    Atom,
    CantorCopy,
    Interval,
    LebesgueDensity,
    MeasureComponent,
    PowerDensity,
    RadonMeasure,
    RationalWindows,
)
from .scale import ScaleFunction
from .utilities import decode_real

log = logging.getLogger(__name__)

SPEC_FILE_VERSION = 1


def to_canonical_json(document: dict) -> str:
    """
    Sorted keys, two-space indent and a trailing newline. Floats use Python's shortest round-trip repr,
    so load -> save of a saved document is byte-identical.
    """
    return json.dumps(document, sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


class JSONCursor:
    """
    A JSON value together with its JSON pointer, so schema errors can name the offending path.
    """
    __slots__ = ("data", "pointer")

    def __init__(self, data: Any, pointer: str = ""):
        self.data = data
        self.pointer = pointer

    def fail(self, message: str, cause: Optional[Exception] = None) -> SpecFileException:
        return SpecFileException(self.pointer, message, cause)

    def _expect(self, kind: type, label: str):
        if not isinstance(self.data, kind):
            raise self.fail(f"expected {label}, got {type(self.data).__name__}")

    def has(self, key: str) -> bool:
        self._expect(dict, "an object")
        return key in self.data

    def child(self, key: Union[str, int]) -> "JSONCursor":
        pointer = f"{self.pointer}/{key}"
        if isinstance(key, int):
            self._expect(list, "an array")
            return JSONCursor(self.data[key], pointer)

        self._expect(dict, "an object")
        if key not in self.data:
            raise SpecFileException(pointer, "required value is missing")
        return JSONCursor(self.data[key], pointer)

    def items(self) -> List["JSONCursor"]:
        self._expect(list, "an array")
        return [self.child(index) for index in range(len(self.data))]

    def real(self) -> float:
        try:
            return decode_real(self.data)
        except ValueError as e:
            raise self.fail(str(e), e)

    def reals(self) -> List[float]:
        return [item.real() for item in self.items()]

    def boolean(self) -> bool:
        self._expect(bool, "a boolean")
        return self.data

    def string(self) -> str:
        self._expect(str, "a string")
        return self.data

    def integer(self) -> int:
        if isinstance(self.data, bool) or not isinstance(self.data, int):
            raise self.fail(f"expected an integer, got {self.data!r}")
        return self.data

    def build(self, constructor: Callable, *args, **kwargs):
        """
        Run a constructor, turning validation failures into pointered schema errors.
        """
        try:
            return constructor(*args, **kwargs)
        except SpecFileException:
            raise
        except DiffusionException as e:
            raise self.fail(str(e), e)


##########
# Parsers
##########
def parse_interval(cursor: JSONCursor) -> Interval:
    return cursor.build(
        Interval,
        cursor.child("lo").real(),
        cursor.child("hi").real(),
        cursor.child("lo_included").boolean(),
        cursor.child("hi_included").boolean(),
    )


def _parse_lebesgue(cursor: JSONCursor) -> LebesgueDensity:
    return cursor.build(
        LebesgueDensity, tuple(cursor.child("breakpoints").reals()), tuple(cursor.child("values").reals())
    )


def _parse_atom(cursor: JSONCursor) -> Atom:
    return cursor.build(Atom, cursor.child("location").real(), cursor.child("mass").real())


def _parse_cantor(cursor: JSONCursor) -> CantorCopy:
    return cursor.build(CantorCopy, parse_interval(cursor.child("support")), cursor.child("weight").real())


def _parse_windows(cursor: JSONCursor) -> RationalWindows:
    cutoff = cursor.child("count_cutoff")
    return cursor.build(
        RationalWindows,
        None if cutoff.data is None else cutoff.integer(),
        cursor.child("signed").boolean(),
        cursor.child("density").real(),
    )


def _parse_power(cursor: JSONCursor) -> PowerDensity:
    return cursor.build(
        PowerDensity,
        cursor.child("anchor").real(),
        cursor.child("exponent").real(),
        cursor.child("coefficient").real(),
        cursor.child("lo").real(),
        cursor.child("hi").real(),
    )


COMPONENT_PARSERS: Dict[str, Callable[[JSONCursor], MeasureComponent]] = {
    LebesgueDensity.KIND: _parse_lebesgue,
    Atom.KIND: _parse_atom,
    CantorCopy.KIND: _parse_cantor,
    RationalWindows.KIND: _parse_windows,
    PowerDensity.KIND: _parse_power,
}


def parse_component(cursor: JSONCursor) -> MeasureComponent:
    kind_cursor = cursor.child("kind")
    kind = kind_cursor.string()
    parser = COMPONENT_PARSERS.get(kind)
    if parser is None:
        raise kind_cursor.fail(f"unknown component kind '{kind}' (known: {', '.join(sorted(COMPONENT_PARSERS))})")
    return parser(cursor)


def parse_measure(cursor: JSONCursor) -> RadonMeasure:
    components = tuple(parse_component(item) for item in cursor.child("components").items())
    return RadonMeasure(components)


def parse_scale(cursor: JSONCursor, interval: Interval) -> ScaleFunction:
    ds_cursor = cursor.child("ds")
    ds = parse_measure(ds_cursor)
    for index, component in enumerate(ds):
        if not component.is_atomless:
            raise ds_cursor.child("components").child(index).fail("a scale measure can not have atoms")

    return cursor.build(
        ScaleFunction, interval, cursor.child("base_x").real(), cursor.child("base_val").real(), ds
    )


def _check_version(cursor: JSONCursor):
    version_cursor = cursor.child("version")
    version = version_cursor.integer()
    if version != SPEC_FILE_VERSION:
        raise version_cursor.fail(f"unsupported version {version}, expected {SPEC_FILE_VERSION}")


def parse_spec(cursor: JSONCursor) -> DiffusionSpec:
    """
    A spec file object: version, name, interval, scale, speed and killing.
    """
    _check_version(cursor)
    interval = parse_interval(cursor.child("interval"))
    scale = parse_scale(cursor.child("scale"), interval)
    speed = parse_measure(cursor.child("speed"))
    killing = parse_measure(cursor.child("killing")) if cursor.has("killing") else RadonMeasure()
    name = cursor.child("name").string() if cursor.has("name") else ""
    return cursor.build(DiffusionSpec, interval, scale, speed, killing, name)


def parse_step_function(cursor: JSONCursor) -> StepFunction:
    return cursor.build(
        StepFunction, tuple(cursor.child("breakpoints").reals()), tuple(cursor.child("values").reals())
    )


def parse_form_function(cursor: JSONCursor, scale: ScaleFunction) -> FormFunction:
    """
    A form function over `scale`: base_x, base_val and one step-function coefficient per scale component.
    When the document carries its own "scale", the coefficients refer to that scale instead (on the same interval).
    """
    _check_version(cursor)
    if cursor.has("scale"):
        scale = parse_scale(cursor.child("scale"), scale.domain)
    coeffs = tuple(parse_step_function(item) for item in cursor.child("coeffs").items())
    return cursor.build(
        FormFunction, scale, cursor.child("base_x").real(), cursor.child("base_val").real(), coeffs
    )


def parse_chain(cursor: JSONCursor) -> FiniteChain:
    """
    Either explicit {"rates", "killing"} or {"spec", "grid"}, the latter discretized on the grid.
    """
    _check_version(cursor)
    if cursor.has("grid"):
        spec_cursor = cursor.child("spec")
        spec = parse_spec(spec_cursor)
        return cursor.child("grid").build(discretize, spec, cursor.child("grid").reals())

    rates_cursor = cursor.child("rates")
    rates = [row.reals() for row in rates_cursor.items()]
    killing = cursor.child("killing").reals() if cursor.has("killing") else None
    return rates_cursor.build(FiniteChain.from_rates, rates, killing)


##########
# Dumpers
##########
def dump_spec(spec: DiffusionSpec) -> dict:
    return {
        "version": SPEC_FILE_VERSION,
        "name": spec.name,
        "interval": spec.interval.dump(),
        "scale": spec.s.dump(),
        "speed": spec.m.dump(),
        "killing": spec.k.dump(),
    }


def dump_form_function(u: FormFunction, with_scale: bool = False) -> dict:
    document = {"version": SPEC_FILE_VERSION, **u.dump()}
    if with_scale:
        document["scale"] = u.scale.dump()
    return document


def dump_chain(chain: FiniteChain) -> dict:
    return {"version": SPEC_FILE_VERSION, **chain.dump()}


##########
# Files
##########
def _read_document(file_path: str) -> JSONCursor:
    try:
        with open(file_path, "r", encoding="utf-8") as document_file:
            data = json.load(document_file)
    except json.JSONDecodeError as e:
        raise SpecFileException("", f"'{file_path}' is not valid JSON: {e}", e)
    except OSError as e:
        raise SpecFileException("", f"can not read '{file_path}': {e}", e)

    log.debug(f"Loaded JSON document '{file_path}'")
    return JSONCursor(data)


def loads_spec(text: str) -> DiffusionSpec:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise SpecFileException("", f"not valid JSON: {e}", e)
    return parse_spec(JSONCursor(data))


def load_spec(file_path: str) -> DiffusionSpec:
    return parse_spec(_read_document(file_path))


def load_form_function(file_path: str, scale: ScaleFunction) -> FormFunction:
    return parse_form_function(_read_document(file_path), scale)


def load_chain(file_path: str) -> FiniteChain:
    return parse_chain(_read_document(file_path))


def save_document(document: dict, file_path: str):
    with open(file_path, "w", encoding="utf-8", newline="\n") as document_file:
        document_file.write(to_canonical_json(document))


def save_spec(spec: DiffusionSpec, file_path: str):
    save_document(dump_spec(spec), file_path)
