"""Closed-form substitutes for learned spline edges.

Each spline edge of a trained network can be replaced by a single analytic
atom of the form ``c * f(a*z + b) + d`` drawn from a small library
(polynomials, trigonometric and sigmoidal shapes, exponentials).  Polynomial
kinds are fit in closed form; the others by a coarse grid over ``(a, b)``
with the linear pair ``(c, d)`` solved exactly per cell, followed by a
damped Gauss-Newton polish so re-fitting an already-analytic edge is a
fixed point.  A full network of substituted edges renders to formula text
that re-parses to the same function.
"""

from dataclasses import dataclass

import numpy as np
import sympy

from .errors import ConfigError, DegenerateDataError, SymbolicFitError
from .kan import _apply_head

ATOM_KINDS = (
    "linear", "quadratic", "cubic", "sin", "cos", "tanh", "exp",
    "log1p_exp", "sigmoid", "constant",
)

#: tie-break order when r2 scores are within tolerance (lower = simpler)
COMPLEXITY = {
    "constant": 0, "linear": 1, "quadratic": 2, "cubic": 3, "tanh": 4,
    "sigmoid": 5, "exp": 6, "log1p_exp": 7, "sin": 8, "cos": 9,
}

R2_TIE = 1e-3


def _sigmoid(t):
    return 1.0 / (1.0 + np.exp(-np.clip(t, -500.0, 500.0)))


def _softplus(t):
    return np.logaddexp(0.0, t)


_ATOM_FUNCS = {
    "linear": (lambda t: t, lambda t: np.ones_like(t)),
    "quadratic": (lambda t: t ** 2, lambda t: 2.0 * t),
    "cubic": (lambda t: t ** 3, lambda t: 3.0 * t ** 2),
    "sin": (np.sin, np.cos),
    "cos": (np.cos, lambda t: -np.sin(t)),
    "tanh": (np.tanh, lambda t: 1.0 - np.tanh(t) ** 2),
    "exp": (np.exp, np.exp),
    "log1p_exp": (_softplus, _sigmoid),
    "sigmoid": (_sigmoid, lambda t: _sigmoid(t) * (1.0 - _sigmoid(t))),
    "constant": (lambda t: np.ones_like(t), lambda t: np.zeros_like(t)),
}


@dataclass(frozen=True)
class SymbolicAtom:
    """One analytic edge ``c * f(a*z + b) + d`` with its fit quality."""

    kind: str
    a: float
    b: float
    c: float
    d: float
    r2: float = 1.0

    def __post_init__(self):
        if self.kind not in ATOM_KINDS:
            raise ConfigError("unknown atom kind %r" % (self.kind,))
        if self.kind != "constant" and self.a == 0.0:
            raise ConfigError("non-constant atoms require a != 0")

    def __call__(self, z):
        f = _ATOM_FUNCS[self.kind][0]
        return self.c * f(self.a * np.asarray(z, dtype=float) + self.b) + self.d

    def to_dict(self):
        return {"kind": self.kind, "a": self.a, "b": self.b, "c": self.c,
                "d": self.d, "r2": self.r2}

    @classmethod
    def from_dict(cls, d):
        return cls(kind=d["kind"], a=float(d["a"]), b=float(d["b"]),
                   c=float(d["c"]), d=float(d["d"]), r2=float(d["r2"]))


def zero_atom():
    return SymbolicAtom("constant", 1.0, 0.0, 0.0, 0.0, r2=1.0)


def _solve_scale_offset(f, y):
    """Least-squares (c, d) for y ~ c*f + d, f and y 1-d."""
    n = f.size
    sf = f.sum()
    sff = float(f @ f)
    sy = y.sum()
    sfy = float(f @ y)
    det = n * sff - sf * sf
    if det <= 1e-12 * max(1.0, n * sff):
        d = y.mean()
        return 0.0, float(d), float(((y - d) ** 2).sum())
    c = (n * sfy - sf * sy) / det
    d = (sy - c * sf) / n
    resid = y - (c * f + d)
    return float(c), float(d), float(resid @ resid)


def _fit_linear(z, y):
    A = np.column_stack([z, np.ones_like(z)])
    (m, q), res, _, _ = np.linalg.lstsq(A, y, rcond=None)
    ss = float(res[0]) if res.size else float(((A @ [m, q] - y) ** 2).sum())
    return SymbolicAtom("linear", 1.0, 0.0, float(m), float(q)), ss


def _fit_quadratic(z, y):
    A = np.column_stack([z ** 2, z, np.ones_like(z)])
    coef, _, _, _ = np.linalg.lstsq(A, y, rcond=None)
    alpha, beta, gamma = (float(v) for v in coef)
    if alpha == 0.0:
        return None, np.inf
    # c*(z + b)^2 + d  ==  c z^2 + 2cb z + (cb^2 + d)
    c = alpha
    b = beta / (2.0 * c)
    d = gamma - c * b * b
    atom = SymbolicAtom("quadratic", 1.0, b, c, d)
    resid = atom(z) - y
    return atom, float(resid @ resid)


def _fit_constant(z, y):
    d = float(y.mean())
    return SymbolicAtom("constant", 1.0, 0.0, 0.0, d), float(((y - d) ** 2).sum())


def _grid_fit(kind, z, y, a_grid, b_grid):
    """Best (a, b, c, d) over the grid; returns (params, ssres)."""
    f = _ATOM_FUNCS[kind][0]
    aa, bb = np.meshgrid(a_grid, b_grid, indexing="ij")
    aa = aa.ravel()
    bb = bb.ravel()
    with np.errstate(over="ignore", invalid="ignore"):
        F = f(aa[:, None] * z[None, :] + bb[:, None])
    ok = np.isfinite(F).all(axis=1)
    if not np.any(ok):
        return None, np.inf
    best = (None, np.inf)
    n = z.size
    sy = y.sum()
    for i in np.nonzero(ok)[0]:
        fi = F[i]
        sf = fi.sum()
        sff = float(fi @ fi)
        sfy = float(fi @ y)
        det = n * sff - sf * sf
        if det <= 1e-12 * max(1.0, n * sff):
            continue
        c = (n * sfy - sf * sy) / det
        d = (sy - c * sf) / n
        resid = y - (c * fi + d)
        ss = float(resid @ resid)
        if ss < best[1]:
            best = ((float(aa[i]), float(bb[i]), c, d), ss)
    return best


def _gauss_newton(kind, z, y, params, iters=80):
    """Damped Gauss-Newton refinement of (a, b, c, d)."""
    f, fp = _ATOM_FUNCS[kind]
    a, b, c, d = params
    with np.errstate(over="ignore", invalid="ignore"):
        resid = c * f(a * z + b) + d - y
    ss = float(resid @ resid)
    lam = 1e-10
    for _ in range(iters):
        with np.errstate(over="ignore", invalid="ignore"):
            t = a * z + b
            ft = f(t)
            fpt = fp(t)
        if not (np.isfinite(ft).all() and np.isfinite(fpt).all()):
            break
        resid = c * ft + d - y
        J = np.column_stack([c * fpt * z, c * fpt, ft, np.ones_like(z)])
        g = J.T @ resid
        H = J.T @ J
        accepted = False
        for _ in range(10):
            try:
                step = np.linalg.solve(H + lam * np.eye(4), -g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            na, nb, nc, nd = a + step[0], b + step[1], c + step[2], d + step[3]
            if na == 0.0:
                na = a
            with np.errstate(over="ignore", invalid="ignore"):
                new_resid = nc * f(na * z + nb) + nd - y
            new_ss = float(new_resid @ new_resid)
            if np.isfinite(new_ss) and new_ss <= ss:
                improved = ss - new_ss
                a, b, c, d, ss = na, nb, nc, nd, new_ss
                lam = max(lam * 0.25, 1e-14)
                accepted = True
                if improved <= 1e-15 * max(ss, 1e-30):
                    return (a, b, c, d), ss
                break
            lam *= 10.0
        if not accepted:
            break
    return (a, b, c, d), ss


def _fit_gridded(kind, z, y):
    span = max(float(z.max() - z.min()), 1e-12)
    # let sin/cos reach a few full periods over the observed span
    a_hi = max(4.0, 8.0 * np.pi / span) if kind in ("sin", "cos") else 4.0
    a_grid = np.linspace(-a_hi, a_hi, 32)
    a_grid = a_grid[a_grid != 0.0]
    b_grid = np.linspace(-4.0, 4.0, 32)
    params, ss = _grid_fit(kind, z, y, a_grid, b_grid)
    if params is None:
        return None, np.inf
    # two zoom rounds around the winning cell, then Gauss-Newton polish
    for _ in range(2):
        a0, b0 = params[0], params[1]
        da = (a_grid[1] - a_grid[0]) if a_grid.size > 1 else 0.5
        db = (b_grid[1] - b_grid[0]) if b_grid.size > 1 else 0.5
        a_grid = np.linspace(a0 - da, a0 + da, 9)
        a_grid = a_grid[a_grid != 0.0]
        b_grid = np.linspace(b0 - db, b0 + db, 9)
        refined, rss = _grid_fit(kind, z, y, a_grid, b_grid)
        if refined is not None and rss < ss:
            params, ss = refined, rss
    params, ss = _gauss_newton(kind, z, y, params)
    if params[0] == 0.0:
        return None, np.inf
    atom = SymbolicAtom(kind, *params)
    return atom, ss


def fit_symbolic_edge(z, y, kinds=None):
    """Best-fitting atom for samples ``(z, y)`` of a univariate edge.

    Maximizes r2 over the library; kinds whose r2 falls within ``R2_TIE``
    of the best are resolved toward the simpler kind.
    """
    z = np.asarray(z, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if z.size != y.size:
        raise ConfigError("z and y must have equal length")
    if z.size < 10:
        raise ConfigError("edge fitting needs at least 10 sample pairs")
    if float(z.max() - z.min()) == 0.0:
        raise DegenerateDataError("edge samples have constant input")
    kinds = tuple(kinds) if kinds is not None else ATOM_KINDS
    for k in kinds:
        if k not in ATOM_KINDS:
            raise ConfigError("unknown atom kind %r" % (k,))

    sstot = float(((y - y.mean()) ** 2).sum())
    # identical targets leave sstot at rounding scale (the mean itself
    # rounds), which would turn r2 into noise; rank by absolute residual
    y_constant = float(y.max() - y.min()) == 0.0
    fits = []
    for kind in kinds:
        if kind == "constant":
            atom, ss = _fit_constant(z, y)
        elif kind == "linear":
            atom, ss = _fit_linear(z, y)
        elif kind == "quadratic":
            atom, ss = _fit_quadratic(z, y)
        else:
            atom, ss = _fit_gridded(kind, z, y)
        if atom is None:
            continue
        if y_constant:
            r2 = 1.0 if ss <= max(1e-18, sstot) else -np.inf
        else:
            r2 = 1.0 - ss / sstot
        fits.append((atom, r2))
    if not fits:
        raise SymbolicFitError("no atom kind produced a finite fit")
    best_r2 = max(r2 for _, r2 in fits)
    # essentially-exact fits only tie with other exact fits, so re-fitting
    # an already-analytic edge is a fixed point
    floor = 1.0 - 1e-12 if best_r2 >= 1.0 - 1e-12 else best_r2 - R2_TIE
    tied = [(atom, r2) for atom, r2 in fits if r2 >= floor]
    atom, r2 = min(tied, key=lambda ar: COMPLEXITY[ar[0].kind])
    return SymbolicAtom(atom.kind, atom.a, atom.b, atom.c, atom.d,
                        r2=float(min(r2, 1.0)))


class SymbolicLayer:
    """Dense layer of atoms mirroring a spline layer's wiring."""

    def __init__(self, atoms, node_kinds):
        self.atoms = [list(row) for row in atoms]
        self.node_kinds = tuple(node_kinds)
        out_dim = len(self.node_kinds)
        for row in self.atoms:
            if len(row) != out_dim:
                raise ConfigError("atom grid does not match node count")

    @property
    def in_dim(self):
        return len(self.atoms)

    @property
    def out_dim(self):
        return len(self.node_kinds)

    def forward(self, Z):
        n = Z.shape[0]
        out = np.empty((n, self.out_dim))
        for r, kind in enumerate(self.node_kinds):
            terms = [self.atoms[q][r](Z[:, q]) for q in range(self.in_dim)]
            if kind == "product":
                out[:, r] = np.prod(np.stack(terms, axis=0), axis=0)
            else:
                out[:, r] = np.sum(np.stack(terms, axis=0), axis=0)
        return out

    def to_dict(self):
        return {
            "atoms": [[a.to_dict() for a in row] for row in self.atoms],
            "node_kinds": list(self.node_kinds),
        }

    @classmethod
    def from_dict(cls, d):
        atoms = [[SymbolicAtom.from_dict(a) for a in row] for row in d["atoms"]]
        return cls(atoms, d["node_kinds"])


class SymbolicMechanism:
    """A network whose every edge is an analytic atom.

    Mirrors the spline network's evaluation pipeline (same wiring, node
    kinds and head) so it can stand in for it inside a model.
    """

    def __init__(self, input_names, layers, head="identity"):
        self.input_names = tuple(input_names)
        self.layers = list(layers)
        if head not in ("identity", "sigmoid", "softmax"):
            raise ConfigError("unknown head %r" % (head,))
        self.head = head
        if self.layers and self.layers[0].in_dim != len(self.input_names):
            raise ConfigError("first layer width does not match input names")

    @property
    def in_dim(self):
        return len(self.input_names)

    @property
    def out_dim(self):
        return self.layers[-1].out_dim

    @property
    def n_hidden_layers(self):
        return len(self.layers) - 1

    def logits(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.in_dim:
            raise ConfigError(
                "expected %d input columns, got %d" % (self.in_dim, X.shape[1])
            )
        h = X
        for layer in self.layers:
            h = layer.forward(h)
        return h

    def forward(self, X):
        return _apply_head(self.head, self.logits(X))

    def edge_r2(self):
        return [
            [[a.r2 for a in row] for row in layer.atoms] for layer in self.layers
        ]

    def formula(self, decimals=17):
        return render_formula(self, decimals=decimals)

    def to_dict(self):
        return {
            "input_names": list(self.input_names),
            "layers": [layer.to_dict() for layer in self.layers],
            "head": self.head,
        }

    @classmethod
    def from_dict(cls, d):
        layers = [SymbolicLayer.from_dict(x) for x in d["layers"]]
        return cls(d["input_names"], layers, head=d["head"])


# --- formula rendering and parsing ------------------------------------------

_SIGMOID_FN = sympy.Function("sigmoid")
_SOFTPLUS_FN = sympy.Function("softplus")

_SYMPY_ATOMS = {
    "linear": lambda t: t,
    "quadratic": lambda t: t ** 2,
    "cubic": lambda t: t ** 3,
    "sin": sympy.sin,
    "cos": sympy.cos,
    "tanh": sympy.tanh,
    "exp": sympy.exp,
    "log1p_exp": _SOFTPLUS_FN,
    "sigmoid": _SIGMOID_FN,
    "constant": lambda t: sympy.Integer(1),
}


def _atom_expr(atom, arg):
    f = _SYMPY_ATOMS[atom.kind]
    inner = sympy.Float(atom.a) * arg + sympy.Float(atom.b)
    return sympy.Float(atom.c) * f(inner) + sympy.Float(atom.d)


def _placeholders(input_names):
    return [sympy.Symbol("v%d" % i) for i in range(len(input_names))]


def _round_floats(expr, decimals):
    subs = {}
    for f in expr.atoms(sympy.Float):
        subs[f] = sympy.Float(round(float(f), decimals))
    return expr.xreplace(subs)


def render_formula(mechanism, decimals=3):
    """Deterministic text for a symbolic mechanism, head wrapper included.

    Coefficients are rounded to ``decimals`` places; the default display
    precision keeps the text compact while re-parsing within rounding
    tolerance, and high precision round-trips essentially exactly.
    """
    symbols = _placeholders(mechanism.input_names)
    values = list(symbols)
    for layer in mechanism.layers:
        nxt = []
        for r, kind in enumerate(layer.node_kinds):
            terms = [_atom_expr(layer.atoms[q][r], values[q])
                     for q in range(layer.in_dim)]
            expr = sympy.Mul(*terms) if kind == "product" else sympy.Add(*terms)
            nxt.append(expr)
        values = nxt
    rendered = []
    for expr in values:
        expr = _round_floats(sympy.expand(expr), decimals)
        rendered.append(sympy.sstr(expr, order="lex"))
    # restore the real input labels (longest placeholder index first)
    texts = []
    for text in rendered:
        for i in reversed(range(len(symbols))):
            text = text.replace("v%d" % i, mechanism.input_names[i])
        texts.append(text)
    if mechanism.head == "sigmoid":
        return "σ(%s)" % texts[0]
    if mechanism.head == "softmax":
        return "softmax(%s)" % ", ".join(texts)
    return ", ".join(texts)


class ParsedFormula:
    """Evaluator for rendered formula text."""

    def __init__(self, head, fns, input_names):
        self.head = head
        self._fns = fns
        self.input_names = tuple(input_names)

    def __call__(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        cols = [X[:, i] for i in range(X.shape[1])]
        outs = [np.broadcast_to(np.asarray(fn(*cols), dtype=float), (X.shape[0],))
                for fn in self._fns]
        return _apply_head(self.head, np.column_stack(outs))


def parse_formula(text, input_names):
    """Parse rendered formula text back into an evaluator."""
    text = text.strip()
    head = "identity"
    inner = text
    for prefix, kind in (("σ(", "sigmoid"), ("sigma(", "sigmoid"),
                         ("softmax(", "softmax")):
        if text.startswith(prefix) and text.endswith(")"):
            head = kind
            inner = text[len(prefix):-1]
            break
    # split top-level commas (softmax renders one expression per class)
    parts = []
    depth = 0
    start = 0
    for i, ch in enumerate(inner):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif ch == "," and depth == 0:
            parts.append(inner[start:i])
            start = i + 1
    parts.append(inner[start:])

    order = sorted(range(len(input_names)),
                   key=lambda i: -len(input_names[i]))
    symbols = _placeholders(input_names)
    local = {"sigmoid": _SIGMOID_FN, "softplus": _SOFTPLUS_FN}
    local.update({"v%d" % i: s for i, s in enumerate(symbols)})
    modules = [{"sigmoid": _sigmoid, "softplus": _softplus}, "numpy"]
    fns = []
    for part in parts:
        for i in order:
            part = part.replace(input_names[i], "v%d" % i)
        part = part.replace("^", "**")
        try:
            expr = sympy.sympify(part, locals=local)
        except (sympy.SympifyError, SyntaxError) as exc:
            raise SymbolicFitError("cannot parse formula text: %s" % (exc,))
        fns.append(sympy.lambdify(symbols, expr, modules=modules))
    return ParsedFormula(head, fns, input_names)
