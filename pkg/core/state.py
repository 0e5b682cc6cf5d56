from typing import Any, Dict, List, Optional, TYPE_CHECKING

# Avoiding circular imports
if TYPE_CHECKING:
    from .form import DiffusionSpec
    from .montecarlo import PathResult


class State(dict):
    """
    A dict-like state that supports "instance.key = value" assignments.

    This is usually subclassed, see SimulationStatisticsState for an example.
    """
    def __init__(self, *args, **kwargs):
        super(State, self).__init__(*args, **kwargs)

    def __setattr__(self, key, value):
        self[key] = value

    def __delattr__(self, item):
        del self[item]

    def __getattr__(self, item):
        try:
            return self[item]
        except KeyError:
            raise AttributeError(item)


class SimulationStatisticsState(State):
    """
    Houses the terminal counters of a batch of simulated paths.
    """
    __slots__ = (
        "paths",
        "hit_left",
        "hit_right",
        "killed",
        "censored",
        "alive",
        "total_steps",
    )

    def __init__(self):
        super(SimulationStatisticsState, self).__init__()

        self.paths: int = 0
        self.hit_left: int = 0
        self.hit_right: int = 0
        self.killed: int = 0
        self.censored: int = 0
        self.alive: int = 0
        self.total_steps: int = 0

    def record(self, result: "PathResult"):
        self.paths += 1
        self.total_steps += result.steps
        counter = result.terminal.name.lower()
        self[counter] = self[counter] + 1

    def record_all(self, results: List["PathResult"]):
        for result in results:
            self.record(result)


class RunState(State):
    """
    "Main" state of one command-line run.
    """
    __slots__ = (
        "command",
        "specs",
        "report",
        "rows",
        "columns",
        "statistics",
        "exit_code",
    )

    def __init__(self, command: str):
        super(RunState, self).__init__()

        self.command: str = command
        self.specs: Dict[str, "DiffusionSpec"] = {}
        self.report: Optional[Dict[str, Any]] = None
        self.rows: List[Dict[str, Any]] = []
        self.columns: List[str] = []
        self.statistics: Optional[SimulationStatisticsState] = None
        self.exit_code: int = 0
