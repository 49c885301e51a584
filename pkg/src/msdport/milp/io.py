"""LP/MPS file export, the matching readers, and solution-file parsing.

Writers are deterministic: the same model always produces byte-identical
files (no timestamps, fixed iteration order, shortest round-trip float
formatting). The readers accept the standard CPLEX-LP and MPS section
grammars (the subset without RANGES/SOS), so files written by other tools
can be loaded as long as they stick to linear rows and binary/continuous
columns. Binary columns are wrapped in MARKER INTORG/INTEND pairs and also
declared with BV bounds for readers that ignore markers.
"""

from __future__ import annotations

import re
from pathlib import Path

from .model import MilpModel, Row, Variable

_SENSE_TO_LP = {"<=": "<=", ">=": ">=", "==": "="}
_SENSE_TO_MPS = {"<=": "L", ">=": "G", "==": "E"}
_MPS_TO_SENSE = {"L": "<=", "G": ">=", "E": "=="}

_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_.\-]*$")


class ModelIoError(ValueError):
    """Malformed model file."""


def _fmt(value: float) -> str:
    """Shortest decimal string that round-trips the double exactly."""
    return repr(float(value))


def _term_chunks(coeffs: dict[str, float], order: list[str]) -> list[str]:
    chunks = []
    for name in order:
        if name not in coeffs:
            continue
        c = coeffs[name]
        sign = "-" if c < 0 else "+"
        chunks.append(f"{sign} {_fmt(abs(c))} {name}")
    return chunks


def _wrap(chunks: list[str], per_line: int = 6) -> list[str]:
    out = []
    for i in range(0, len(chunks), per_line):
        prefix = " " if i == 0 else "   "
        out.append(prefix + " ".join(chunks[i : i + per_line]))
    return out


def export_lp(model: MilpModel, path) -> Path:
    """Write the model in CPLEX LP format."""
    path = Path(path)
    if not path.name:
        raise ModelIoError("empty output path")
    order = model.variable_names()
    lines = [f"\\ msdport model {model.name}"]
    lines.append("Maximize" if model.objective_sense == "max" else "Minimize")
    obj_chunks = _term_chunks(model.objective, order)
    if not obj_chunks:
        obj_chunks = ["+ 0 " + order[0]]
    lines += _wrap(["obj:"] + obj_chunks)
    lines.append("Subject To")
    for row in model.rows:
        chunks = [f"{row.name}:"] + _term_chunks(row.coeffs, order)
        chunks.append(f"{_SENSE_TO_LP[row.sense]} {_fmt(row.rhs)}")
        lines += _wrap(chunks)
    bound_lines = []
    for v in model.variables:
        fixed = v.upper is not None and v.upper == v.lower
        if fixed:
            bound_lines.append(f" {v.name} = {_fmt(v.lower)}")
            continue
        if v.lower != 0.0:
            bound_lines.append(f" {v.name} >= {_fmt(v.lower)}")
        if v.upper is not None and v.kind == "continuous":
            bound_lines.append(f" {v.name} <= {_fmt(v.upper)}")
    if bound_lines:
        lines.append("Bounds")
        lines += bound_lines
    binaries = model.binary_names()
    if binaries:
        lines.append("Binaries")
        for i in range(0, len(binaries), 8):
            lines.append(" " + " ".join(binaries[i : i + 8]))
    lines.append("End")
    path.write_text("\n".join(lines) + "\n")
    return path


def export_mps(model: MilpModel, path) -> Path:
    """Write the model in MPS format (column layout, INTORG/INTEND markers)."""
    path = Path(path)
    if not path.name:
        raise ModelIoError("empty output path")
    lines = [f"NAME          {model.name.upper()}"]
    lines.append("OBJSENSE")
    lines.append("    MAX" if model.objective_sense == "max" else "    MIN")
    lines.append("ROWS")
    lines.append(" N  obj")
    for row in model.rows:
        lines.append(f" {_SENSE_TO_MPS[row.sense]}  {row.name}")

    # Column-wise coefficients: objective first, then rows in model order.
    per_var: dict[str, list[tuple[str, float]]] = {v.name: [] for v in model.variables}
    for name, coef in model.objective.items():
        per_var[name].append(("obj", coef))
    for row in model.rows:
        for name, coef in row.coeffs.items():
            per_var[name].append((row.name, coef))

    lines.append("COLUMNS")
    marker_id = 0
    in_integer = False
    for var in model.variables:
        want_integer = var.kind == "binary"
        if want_integer != in_integer:
            tag = "'INTORG'" if want_integer else "'INTEND'"
            lines.append(f"    MARKER{marker_id:<24}'MARKER'                 {tag}")
            marker_id += 1
            in_integer = want_integer
        entries = per_var[var.name]
        if not entries:
            entries = [("obj", 0.0)]
        for i in range(0, len(entries), 2):
            pair = entries[i : i + 2]
            parts = [f"    {var.name:<13}"]
            for row_name, coef in pair:
                parts.append(f"{row_name:<13}")
                parts.append(f"{_fmt(coef):<15}")
            lines.append(" ".join(parts).rstrip())
    if in_integer:
        lines.append(f"    MARKER{marker_id:<24}'MARKER'                 'INTEND'")

    lines.append("RHS")
    rhs_entries = [(row.name, row.rhs) for row in model.rows if row.rhs != 0.0]
    for i in range(0, len(rhs_entries), 2):
        pair = rhs_entries[i : i + 2]
        parts = ["    RHS          "]
        for row_name, value in pair:
            parts.append(f"{row_name:<13}")
            parts.append(f"{_fmt(value):<15}")
        lines.append(" ".join(parts).rstrip())

    bound_lines = []
    for var in model.variables:
        if var.upper is not None and var.upper == var.lower:
            bound_lines.append(f" FX BND           {var.name:<13} {_fmt(var.lower)}")
            continue
        if var.kind == "binary":
            bound_lines.append(f" BV BND           {var.name}")
            continue
        if var.lower != 0.0:
            bound_lines.append(f" LO BND           {var.name:<13} {_fmt(var.lower)}")
        if var.upper is not None:
            bound_lines.append(f" UP BND           {var.name:<13} {_fmt(var.upper)}")
    if bound_lines:
        lines.append("BOUNDS")
        lines += bound_lines
    lines.append("ENDATA")
    path.write_text("\n".join(lines) + "\n")
    return path


# ---------------------------------------------------------------------------
# Readers
# ---------------------------------------------------------------------------


def _is_number(token: str) -> bool:
    try:
        float(token)
        return True
    except ValueError:
        return False


def parse_lp(path) -> MilpModel:
    """Read a CPLEX LP file back into a model."""
    text = Path(path).read_text()
    # Strip comments, join everything into a token stream.
    tokens: list[str] = []
    for raw in text.splitlines():
        line = raw.split("\\")[0]
        # Make sense operators token-separable.
        line = re.sub(r"(<=|>=|=<|=>|=|:)", r" \1 ", line)
        tokens += line.split()

    sections = {"maximize", "minimize", "subject", "st", "s.t.", "bounds",
                "binaries", "binary", "general", "generals", "end"}
    pos = 0
    sense = "max"
    objective: dict[str, float] = {}
    rows: list[Row] = []
    binaries: set[str] = set()
    uppers: dict[str, float] = {}
    lowers: dict[str, float] = {}
    seen_vars: list[str] = []
    seen_set: set[str] = set()

    def note_var(name: str) -> None:
        if name not in seen_set:
            seen_set.add(name)
            seen_vars.append(name)

    def lower(tok: str) -> str:
        return tok.lower()

    def parse_expr(stop_at_sense: bool):
        """Consume +/- coef var terms; return (coeffs, sense, rhs)."""
        nonlocal pos
        coeffs: dict[str, float] = {}
        sign = 1.0
        pending: float | None = None
        while pos < len(tokens):
            tok = tokens[pos]
            low = lower(tok)
            if low in sections:
                break
            if tok in ("<=", ">=", "=", "=<", "=>"):
                pos += 1
                rhs = float(tokens[pos])
                pos += 1
                s = {"<=": "<=", "=<": "<=", ">=": ">=", "=>": ">=", "=": "=="}[tok]
                return coeffs, s, rhs
            if tok == "+":
                sign = 1.0
            elif tok == "-":
                sign = -1.0
            elif _is_number(tok):
                pending = sign * float(tok)
                sign = 1.0
            else:
                coef = pending if pending is not None else sign
                coeffs[tok] = coeffs.get(tok, 0.0) + coef
                note_var(tok)
                pending = None
                sign = 1.0
            pos += 1
        return coeffs, None, None

    while pos < len(tokens):
        tok = lower(tokens[pos])
        if tok in ("maximize", "minimize"):
            sense = "max" if tok == "maximize" else "min"
            pos += 1
            if pos + 1 < len(tokens) and tokens[pos + 1] == ":":
                pos += 2  # objective label
            objective, _, _ = parse_expr(stop_at_sense=False)
        elif tok in ("subject", "st", "s.t."):
            pos += 1
            if tok == "subject" and pos < len(tokens) and lower(tokens[pos]) == "to":
                pos += 1
            while pos < len(tokens) and lower(tokens[pos]) not in sections:
                name = tokens[pos]
                if pos + 1 < len(tokens) and tokens[pos + 1] == ":":
                    pos += 2
                else:
                    name = f"row_{len(rows)}"
                coeffs, s, rhs = parse_expr(stop_at_sense=True)
                if s is None:
                    raise ModelIoError(f"constraint {name} has no sense/rhs")
                rows.append(Row(name, "parsed", coeffs, s, rhs))
        elif tok == "bounds":
            pos += 1
            while pos < len(tokens) and lower(tokens[pos]) not in sections:
                # Forms: "x <= u", "x >= l", "x = v", "l <= x <= u", "x free".
                head = tokens[pos]
                if _is_number(head):
                    lo = float(head)
                    pos += 2  # skip l, <=
                    var = tokens[pos]
                    note_var(var)
                    lowers[var] = lo
                    pos += 1
                    if pos < len(tokens) and tokens[pos] in ("<=", "=<"):
                        uppers[var] = float(tokens[pos + 1])
                        pos += 2
                else:
                    var = head
                    note_var(var)
                    pos += 1
                    nxt = lower(tokens[pos]) if pos < len(tokens) else ""
                    if nxt == "free":
                        pos += 1
                    elif tokens[pos] in ("<=", "=<"):
                        uppers[var] = float(tokens[pos + 1])
                        pos += 2
                    elif tokens[pos] in (">=", "=>"):
                        lowers[var] = float(tokens[pos + 1])
                        pos += 2
                    elif tokens[pos] == "=":
                        value = float(tokens[pos + 1])
                        lowers[var] = value
                        uppers[var] = value
                        pos += 2
        elif tok in ("binaries", "binary", "general", "generals"):
            is_binary = tok in ("binaries", "binary")
            pos += 1
            while pos < len(tokens) and lower(tokens[pos]) not in sections:
                if is_binary:
                    binaries.add(tokens[pos])
                    note_var(tokens[pos])
                pos += 1
        elif tok == "end":
            break
        else:
            raise ModelIoError(f"unexpected token {tokens[pos]!r} at top level")

    variables = tuple(
        Variable(n, "binary" if n in binaries else "continuous",
                 upper=uppers.get(n), lower=lowers.get(n, 0.0))
        for n in seen_vars
    )
    return MilpModel(
        name=Path(path).stem,
        variables=variables,
        rows=tuple(rows),
        objective=objective,
        objective_sense=sense,
    )


def parse_mps(path) -> MilpModel:
    """Read an MPS file (sections NAME/OBJSENSE/ROWS/COLUMNS/RHS/BOUNDS)."""
    sense = "min"
    row_order: list[tuple[str, str]] = []  # (name, sense); objective excluded
    obj_row: str | None = None
    coeffs_by_row: dict[str, dict[str, float]] = {}
    objective: dict[str, float] = {}
    rhs: dict[str, float] = {}
    binaries: set[str] = set()
    uppers: dict[str, float] = {}
    lowers: dict[str, float] = {}
    var_order: list[str] = []
    var_set: set[str] = set()

    def note_var(name: str) -> None:
        if name not in var_set:
            var_set.add(name)
            var_order.append(name)

    section = None
    in_integer = False
    for ln, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        if not raw.strip() or raw.lstrip().startswith("*"):
            continue
        head = raw.split()[0].upper()
        if not raw[0].isspace() and head in (
            "NAME", "OBJSENSE", "ROWS", "COLUMNS", "RHS", "RANGES", "BOUNDS", "ENDATA"
        ):
            section = head
            if head == "ENDATA":
                break
            continue
        fields = raw.split()
        if section == "OBJSENSE":
            sense = "max" if fields[0].upper().startswith("MAX") else "min"
        elif section == "ROWS":
            kind, name = fields[0].upper(), fields[1]
            if kind == "N":
                if obj_row is None:
                    obj_row = name
            else:
                if kind not in _MPS_TO_SENSE:
                    raise ModelIoError(f"line {ln}: unknown row type {kind}")
                row_order.append((name, _MPS_TO_SENSE[kind]))
                coeffs_by_row[name] = {}
        elif section == "COLUMNS":
            if len(fields) >= 3 and fields[1] == "'MARKER'":
                tag = fields[2].strip("'").upper()
                in_integer = tag == "INTORG"
                continue
            var = fields[0]
            note_var(var)
            if in_integer:
                binaries.add(var)
            pairs = fields[1:]
            if len(pairs) % 2 != 0:
                raise ModelIoError(f"line {ln}: odd number of column fields")
            for i in range(0, len(pairs), 2):
                row_name, value = pairs[i], float(pairs[i + 1])
                if row_name == obj_row:
                    objective[var] = objective.get(var, 0.0) + value
                elif row_name in coeffs_by_row:
                    d = coeffs_by_row[row_name]
                    d[var] = d.get(var, 0.0) + value
                else:
                    raise ModelIoError(f"line {ln}: unknown row {row_name!r}")
        elif section == "RHS":
            pairs = fields[1:]  # fields[0] is the RHS set name
            for i in range(0, len(pairs), 2):
                rhs[pairs[i]] = float(pairs[i + 1])
        elif section == "BOUNDS":
            btype = fields[0].upper()
            var = fields[2]
            note_var(var)
            if btype == "BV":
                binaries.add(var)
            elif btype == "UP":
                uppers[var] = float(fields[3])
            elif btype == "LO":
                lowers[var] = float(fields[3])
            elif btype == "FX":
                value = float(fields[3])
                lowers[var] = value
                uppers[var] = value
            elif btype == "MI":
                pass  # free-below; not produced by our writer
            else:
                raise ModelIoError(f"unsupported bound type {btype}")
        elif section == "RANGES":
            raise ModelIoError("RANGES sections are not supported")

    rows = tuple(
        Row(name, "parsed", coeffs_by_row[name], row_sense, rhs.get(name, 0.0))
        for name, row_sense in row_order
    )
    variables = tuple(
        Variable(n, "binary" if n in binaries else "continuous",
                 upper=uppers.get(n), lower=lowers.get(n, 0.0))
        for n in var_order
    )
    return MilpModel(
        name=Path(path).stem,
        variables=variables,
        rows=rows,
        objective=objective,
        objective_sense=sense,
    )


def write_solution_file(values: dict[str, float], path, objective: float | None = None) -> Path:
    """Write name/value pairs in the common solver .sol layout."""
    path = Path(path)
    lines = []
    if objective is not None:
        lines.append(f"# Objective value = {_fmt(objective)}")
    for name, value in values.items():
        lines.append(f"{name} {_fmt(value)}")
    path.write_text("\n".join(lines) + "\n")
    return path


def parse_solution_file(path) -> dict[str, float]:
    """Parse 'name value' pairs; '#'/'='-prefixed and malformed lines are skipped."""
    values: dict[str, float] = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line or line.startswith(("#", "=", "*")):
            continue
        parts = line.split()
        if len(parts) < 2 or not _NAME_RE.match(parts[0]) or not _is_number(parts[1]):
            continue
        values[parts[0]] = float(parts[1])
    return values
