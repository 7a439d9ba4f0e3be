"""
Document Manager for Veritest
Parses environment documents and writes CSV/JSON artifacts
"""
import csv
import io
import json
import logging
import re
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import config
from authentication import FiniteAuthRate, environment_from_alpha
from continuous_model import ContinuousAuthRate, TypeDistribution, precision_from_alpha
from discernment import PassageMatrix
from errors import DocumentError, VeritestError
from mechanisms import CostFunction
from profiles import FiniteProfile, passage_array

logger = logging.getLogger(__name__)

AUCTION_COLUMNS = ["agent", "theta", "Q", "T", "U", "phi", "phi_myerson"]

_LINE_PATTERN = re.compile(r"line (\d+)")


def load_document(path):
    """Read a TOML (or .json) environment document from disk."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise DocumentError(f"cannot read {path}: {e.strerror or e}") from e
    fmt = "json" if path.suffix.lower() == ".json" else "toml"
    return parse_document(text, source=str(path), fmt=fmt)


def parse_document(text, source="<document>", fmt="toml"):
    if fmt == "json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise DocumentError(f"{source}: {e.msg}", line=e.lineno) from e
    else:
        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as e:
            match = _LINE_PATTERN.search(str(e))
            raise DocumentError(f"{source}: {e}",
                                line=int(match.group(1)) if match else None) from e
    if not isinstance(data, dict):
        raise DocumentError(f"{source}: document must be a table of sections", line=1)
    return EnvironmentDocument(data, text, source)


class EnvironmentDocument:
    """Sections [types], [tests] or [alpha], [cost], [[agents]], [grid], [output], [profile]."""

    def __init__(self, data, text="", source="<document>"):
        self.data = data
        self.text = text
        self.source = source
        self._check_sections()

    def _check_sections(self):
        if "tests" in self.data and "alpha" in self.data:
            raise DocumentError("give either [tests] or [alpha], not both",
                                line=self.locate("alpha"))
        for k, agent in enumerate(self.data.get("agents", [])):
            if not isinstance(agent, dict) or "alpha" not in agent:
                raise DocumentError(f"agent {k} needs an [agents.alpha] table",
                                    line=self.locate("agents"))
            if "tests" in agent:
                raise DocumentError(f"agent {k} gives tests; agents are specified by alpha",
                                    line=self.locate("agents", "tests"))

    # ── Lookup ────────────────────────────────────────────────────────────────

    def has(self, name):
        return name in self.data

    def section(self, name):
        value = self.data.get(name)
        if not isinstance(value, dict):
            raise DocumentError(f"missing [{name}] section", line=self.locate(name))
        return value

    def locate(self, *path):
        """Best-effort line number of a section or key, for diagnostics."""
        lines = self.text.splitlines()
        start = 0
        for depth in range(len(path), 0, -1):
            header = re.compile(r"^\s*\[\[?\s*" + re.escape(".".join(path[:depth])) + r"\s*\]\]?")
            found = next((n for n, line in enumerate(lines) if header.match(line)), None)
            if found is not None:
                if depth == len(path):
                    return found + 1
                start = found
                break
        key = re.compile(r"^\s*\"?" + re.escape(str(path[-1])) + r"\"?\s*=") if path else None
        for n in range(start, len(lines)):
            if key is not None and key.match(lines[n]):
                return n + 1
        return None

    def _get(self, table, key, *path, kind=None, default=None, required=True):
        if key not in table:
            if required:
                raise DocumentError(f"missing key {'.'.join(path + (key,))}",
                                    line=self.locate(*path) if path else None)
            return default
        value = table[key]
        if kind is float:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise DocumentError(f"{key} must be a number", line=self.locate(*path, key))
            return float(value)
        if kind is list and not isinstance(value, list):
            raise DocumentError(f"{key} must be a list", line=self.locate(*path, key))
        return value

    def _wrap(self, func, *path):
        try:
            return func()
        except DocumentError:
            raise
        except (VeritestError, ValueError, KeyError, TypeError) as e:
            raise DocumentError(str(e), line=self.locate(*path)) from e

    # ── Finite environments ───────────────────────────────────────────────────

    def type_labels(self):
        types = self.section("types")
        labels = self._get(types, "labels", "types", kind=list)
        if not labels:
            raise DocumentError("types.labels must be nonempty", line=self.locate("types", "labels"))
        return [str(x) for x in labels]

    def finite_environment(self):
        """PassageMatrix from [tests], or the environment reconstructed from [alpha]."""
        if self.has("alpha") and not self.has("tests"):
            env, _ = self._wrap(lambda: environment_from_alpha(self.finite_alpha()), "alpha")
            return env
        types = self.type_labels()
        tests = self.section("tests")
        if "rates" in tests:
            rates = self._get(tests, "rates", "tests")
            labels = [str(x) for x in tests.get("labels", list(rates))]
            for tau in labels:
                row = self._get(rates, tau, "tests", "rates", kind=list)
                if len(row) != len(types):
                    raise DocumentError(f"test {tau} needs {len(types)} passage rates",
                                        line=self.locate("tests", "rates", tau))
                for p in row:
                    if isinstance(p, bool) or not isinstance(p, (int, float)) or not 0.0 <= p <= 1.0:
                        raise DocumentError(f"passage rate {p!r} of {tau} is not in [0, 1]",
                                            line=self.locate("tests", "rates", tau))
            return self._wrap(lambda: PassageMatrix.from_rates(types, labels, rates), "tests")
        weights = self._get(tests, "weights", "tests")
        scores = self._get(tests, "scores", "tests", kind=list)
        labels = [str(x) for x in tests.get("labels", list(weights))]
        for tau in labels:
            self._get(weights, tau, "tests", "weights", kind=list)
        return self._wrap(lambda: PassageMatrix.from_weights(types, labels, scores, weights),
                          "tests", "weights")

    def finite_alpha(self):
        types = self.type_labels()
        alpha = self.section("alpha")
        if "matrix" in alpha:
            matrix = self._get(alpha, "matrix", "alpha", kind=list)
            return self._wrap(lambda: FiniteAuthRate(types, matrix), "alpha", "matrix")
        reports = self._get(alpha, "reports", "alpha")
        unknown = [r for rs in reports.values() for r in rs if str(r) not in types]
        if unknown:
            raise DocumentError(f"unknown report {unknown[0]!r}", line=self.locate("alpha", "reports"))
        return FiniteAuthRate.from_correspondence(types, reports)

    def query(self):
        """Optional [query] type/tau/psi for a single discernment check."""
        query = self.data.get("query", {})
        return query.get("type"), query.get("tau"), query.get("psi")

    # ── Continuous environments ───────────────────────────────────────────────

    def distribution(self, table=None, *path):
        if table is None:
            table, path = self.section("types"), ("types",)
        name = str(table.get("distribution", "uniform"))
        if name not in config.DISTRIBUTION_PRESETS:
            raise DocumentError(f"unknown distribution {name!r}",
                                line=self.locate(*path, "distribution"))
        if name == "point":
            value = self._get(table, "value", *path, kind=float)
            return TypeDistribution.point(value)
        if name == "tabulated":
            points = self._get(table, "points", *path, kind=list)
            density = self._get(table, "density", *path, kind=list)
            return self._wrap(lambda: TypeDistribution.tabulated(points, density), *path, "points")
        lo = self._get(table, "lo", *path, kind=float, default=0.0, required=False)
        hi = self._get(table, "hi", *path, kind=float, default=1.0, required=False)
        if not lo < hi:
            raise DocumentError(f"type interval needs lo < hi, got [{lo}, {hi}]",
                                line=self.locate(*path, "hi"))
        if name == "truncated_exponential":
            rate = self._get(table, "rate", *path, kind=float, default=1.0, required=False)
            return self._wrap(lambda: TypeDistribution.truncated_exponential(rate, lo, hi),
                              *path, "rate")
        return TypeDistribution.uniform(lo, hi)

    def continuous_alpha(self, dist, table=None, *path):
        if table is None:
            table, path = self.section("alpha"), ("alpha",)
        preset = str(table.get("preset", "exponential"))
        if preset not in config.ALPHA_PRESETS:
            raise DocumentError(f"unknown alpha preset {preset!r}", line=self.locate(*path, "preset"))
        if preset == "power":
            sigma = self._get(table, "sigma", *path, kind=float)
            return self._wrap(lambda: ContinuousAuthRate.power(sigma, dist.lo, dist.hi),
                              *path, "sigma")
        if preset == "tabulated":
            points = self._get(table, "points", *path, kind=list)
            matrix = self._get(table, "table", *path, kind=list)
            return self._wrap(lambda: ContinuousAuthRate.tabulated(points, matrix), *path, "table")
        if "lambda_points" in table:
            lam = (self._get(table, "lambda_points", *path, kind=list),
                   self._get(table, "lambda_values", *path, kind=list))
        else:
            lam = self._get(table, "lambda", *path, kind=float, default=1.0, required=False)
            if lam < 0.0:
                raise DocumentError("lambda must be nonnegative", line=self.locate(*path, "lambda"))
        return self._wrap(lambda: ContinuousAuthRate.exponential(lam, dist.lo, dist.hi),
                          *path, "lambda_points")

    def kernel(self, alpha):
        return self._wrap(lambda: precision_from_alpha(alpha), "alpha")

    def cost(self):
        table = self.data.get("cost", {})
        preset = str(table.get("preset", "quadratic"))
        if preset not in config.COST_PRESETS:
            raise DocumentError(f"unknown cost preset {preset!r}", line=self.locate("cost", "preset"))
        scale = self._get(table, "scale", "cost", kind=float, default=1.0, required=False)
        if preset == "power":
            exponent = self._get(table, "exponent", "cost", kind=float, default=2.0, required=False)
            return self._wrap(lambda: CostFunction.power(scale, exponent), "cost")
        return self._wrap(lambda: CostFunction.quadratic(scale), "cost", "scale")

    def agents(self):
        """(distribution, alpha) per [[agents]] entry."""
        agents = self.data.get("agents")
        if not isinstance(agents, list) or not agents:
            raise DocumentError("an auction document needs [[agents]] entries",
                                line=self.locate("agents"))
        result = []
        for agent in agents:
            dist = self.distribution(agent, "agents")
            alpha = self.continuous_alpha(dist, agent["alpha"], "agents", "alpha")
            result.append((dist, alpha))
        return result

    # ── Run settings ──────────────────────────────────────────────────────────

    def grid_n(self, default=config.DEFAULT_GRID_N):
        grid = self.data.get("grid", {})
        value = grid.get("n", default)
        if isinstance(value, bool) or not isinstance(value, int) or value < 1:
            raise DocumentError("grid.n must be a positive integer", line=self.locate("grid", "n"))
        return value

    def lambdas(self, default=None):
        grid = self.data.get("grid", {})
        values = grid.get("lambdas", default if default is not None else config.DEFAULT_LAMBDAS)
        try:
            return [float(v) for v in values]
        except (TypeError, ValueError) as e:
            raise DocumentError("grid.lambdas must be numbers", line=self.locate("grid", "lambdas")) from e

    def output_prefix(self):
        return self.data.get("output", {}).get("prefix")

    # ── Profiles ──────────────────────────────────────────────────────────────

    def profile(self):
        """FiniteProfile from [profile]; performance defaults to full effort."""
        env = self.finite_environment()
        table = self.section("profile")
        messages = self._get(table, "messages", "profile", kind=list, default=list(env.types),
                             required=False)
        decisions = self._get(table, "decisions", "profile", kind=list)
        arrays = {key: self._get(table, key, "profile", kind=list)
                  for key in ("report", "testing", "decision", "utility")}
        performance = table.get("performance")
        if performance is None:
            performance = np.broadcast_to(
                passage_array(env)[:, None],
                (len(env.types), len(messages), len(env.tests), env.scoreset.size))
        return self._wrap(lambda: FiniteProfile(env, messages, decisions, arrays["report"],
                                                arrays["testing"], performance,
                                                arrays["decision"], arrays["utility"]),
                          "profile")


# ── Artifacts ─────────────────────────────────────────────────────────────────

def format_float(x):
    return format(float(x), f".{config.CSV_PRECISION}g")


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format_float(value)
    return str(value)


def csv_text(columns, rows):
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    return buffer.getvalue()


def write_text(path, text):
    """Write to a file, or return the text unchanged when path is None."""
    if path is not None:
        Path(path).write_text(text, encoding="utf-8", newline="")
    return text


def mechanism_csv(mech):
    if hasattr(mech, "n_agents"):
        return csv_text(AUCTION_COLUMNS, mech.rows())
    return csv_text(config.MECHANISM_COLUMNS, mech.rows())


def table_csv(table):
    """CSV of a {'columns': [...], 'rows': [...]} dataset."""
    return csv_text(table["columns"], table["rows"])


def _json_default(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    raise TypeError(f"cannot serialize {type(value).__name__}")


def json_text(obj):
    return json.dumps(obj, indent=config.JSON_INDENT, sort_keys=True, default=_json_default) + "\n"


class MechanismTable:
    """Columns of an ingested mechanism CSV."""

    def __init__(self, columns):
        self.columns = columns

    @property
    def is_auction(self):
        return "agent" in self.columns

    def schedule(self):
        """(grid, q, t) of a single-agent mechanism."""
        return self.columns["theta"], self.columns["q"], self.columns["t"]

    def agents(self):
        """(grid, Q, T) per agent of an auction."""
        agent = self.columns["agent"].astype(int)
        return [(self.columns["theta"][agent == i], self.columns["Q"][agent == i],
                 self.columns["T"][agent == i]) for i in np.unique(agent)]


def read_summary(path):
    """A solve summary (result record) written next to its mechanism CSV."""
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise DocumentError(f"cannot read {path}: {e.strerror or e}") from e
    except json.JSONDecodeError as e:
        raise DocumentError(f"{path}: {e.msg}", line=e.lineno) from e
    if not isinstance(data, dict):
        raise DocumentError(f"{path}: summary must be a JSON object", line=1)
    return data


def read_mechanism_csv(path):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise DocumentError(f"cannot read {path}: {e.strerror or e}") from e
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise DocumentError(f"{path}: empty mechanism file", line=1) from None
    expected = AUCTION_COLUMNS if "agent" in header else config.MECHANISM_COLUMNS
    if header != expected:
        raise DocumentError(f"{path}: expected columns {','.join(expected)}", line=1)
    values = []
    for n, row in enumerate(reader, start=2):
        try:
            values.append([float(x) for x in row])
        except ValueError as e:
            raise DocumentError(f"{path}: {e}", line=n) from e
        if len(row) != len(header):
            raise DocumentError(f"{path}: expected {len(header)} fields", line=n)
    data = np.array(values, dtype=float).reshape(-1, len(header))
    return MechanismTable({name: data[:, k] for k, name in enumerate(header)})
