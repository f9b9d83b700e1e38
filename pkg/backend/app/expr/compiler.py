"""
Code generation for fast repeated evaluation

A list of expressions becomes one Python function of (t, q, p, params) that
returns a tuple of floats. Every interior node is assigned to a temporary, so
shared subtrees are computed once and nesting depth stays flat. The generated
code performs the same IEEE operations as the tree evaluator.
"""
import math
from typing import Callable, Dict, Mapping, Sequence, Tuple

import numpy as np

from app.core.exceptions import UndeclaredNameError
from app.expr.evaluate import Bindings, evaluate, pow_
from app.expr.nodes import Constant, Expr, Unary, Variable, coordinate_index

_NAMESPACE = {
    "_sqrt": math.sqrt,
    "_sin": math.sin,
    "_cos": math.cos,
    "_exp": math.exp,
    "_ln": math.log,
    "_pow": pow_,
}


class _Emitter:
    def __init__(self):
        self.lines = []
        self.names: Dict[Expr, str] = {}

    def leaf(self, e: Expr) -> str:
        if isinstance(e, Constant):
            if math.isfinite(e.value):
                return f"({e.value!r})"
            return f"float({repr(e.value)!r})"
        name = e.name
        if name == "t":
            return "t"
        if name[0] in "qp" and name[1:].isdigit():
            return f"{name[0]}[{coordinate_index(name)}]"
        return f"k[{name!r}]"

    def emit(self, e: Expr) -> str:
        if isinstance(e, (Constant, Variable)):
            return self.leaf(e)
        cached = self.names.get(e)
        if cached is not None:
            return cached
        if isinstance(e, Unary):
            x = self.emit(e.child)
            code = f"-{x}" if e.op == "neg" else f"_{e.op}({x})"
        else:
            x, y = self.emit(e.left), self.emit(e.right)
            code = f"_pow({x}, {y})" if e.op == "^" else f"{x} {e.op} {y}"
        name = f"_v{len(self.names)}"
        self.lines.append(f"    {name} = {code}")
        self.names[e] = name
        return name


class CompiledExprs:
    """Callable evaluating a fixed list of expressions"""

    def __init__(self, exprs: Sequence[Expr]):
        self.exprs = tuple(exprs)
        emitter = _Emitter()
        results = [emitter.emit(e) for e in self.exprs]
        body = emitter.lines + [f"    return ({''.join(r + ', ' for r in results)})"]
        source = "def _kernel(t, q, p, k):\n" + "\n".join(body) + "\n"
        namespace = dict(_NAMESPACE)
        exec(compile(source, "<expr-kernel>", "exec"), namespace)
        self._kernel: Callable = namespace["_kernel"]
        self.source = source

    def __len__(self) -> int:
        return len(self.exprs)

    def __call__(self, t: float, q, p, params: Mapping[str, float]) -> Tuple[float, ...]:
        q = q.tolist() if isinstance(q, np.ndarray) else q
        p = p.tolist() if isinstance(p, np.ndarray) else p
        t = float(t)
        try:
            return self._kernel(t, q, p, params)
        except (ValueError, ZeroDivisionError, OverflowError):
            # rerun on the tree to name the failing subexpression
            bindings = Bindings(t=t, q=q, p=p, params=params)
            for e in self.exprs:
                evaluate(e, bindings)
            raise
        except (KeyError, IndexError) as exc:
            bindings = Bindings(t=t, q=q, p=p, params=params)
            for e in self.exprs:
                evaluate(e, bindings)
            raise UndeclaredNameError(str(exc), "unbound name") from exc

    def array(self, t: float, q, p, params: Mapping[str, float]) -> np.ndarray:
        return np.array(self(t, q, p, params), dtype=float)


def compile_exprs(exprs: Sequence[Expr]) -> CompiledExprs:
    return CompiledExprs(exprs)


__all__ = ["CompiledExprs", "compile_exprs"]
