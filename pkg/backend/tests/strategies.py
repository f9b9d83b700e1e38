"""
Hypothesis strategies for expression trees and states
"""
from hypothesis import strategies as st

from app.expr import Binary, Bindings, Constant, Unary, Variable

NAMES = ("t", "q1", "q2", "q3", "p1", "p2", "p3", "a", "m")
FUNCTIONS = ("sqrt", "sin", "cos", "exp", "ln")

finite_floats = st.floats(allow_nan=False, allow_infinity=False, width=64)
constants = finite_floats.map(Constant)
variables = st.sampled_from(NAMES).map(Variable)
exponents = st.one_of(
    st.integers(min_value=-4, max_value=6).map(lambda value: Constant(float(value))),
    st.sampled_from((0.5, 1.5, -0.5)).map(Constant),
    st.integers(min_value=1, max_value=4).map(lambda value: Unary("neg", Constant(float(value)))),
)


def _extend(children):
    return st.one_of(
        st.tuples(st.sampled_from(("+", "-", "*", "/")), children, children).map(lambda x: Binary(*x)),
        st.tuples(children, exponents).map(lambda x: Binary("^", *x)),
        st.tuples(st.sampled_from(FUNCTIONS), children).map(lambda x: Unary(*x)),
        children.map(lambda child: Unary("neg", child)),
    )


expressions = st.recursive(st.one_of(constants, variables), _extend, max_leaves=12)

small_values = st.floats(min_value=-2.0, max_value=2.0, allow_nan=False)

# points where every expression of the smooth corpus in test_expr is defined
smooth_points = st.builds(
    lambda t, q1, q2, p1, p2: Bindings(t=t, q=[q1, q2], p=[p1, p2], params={"a": 1.5}),
    small_values, small_values, small_values, small_values,
    st.floats(min_value=0.2, max_value=2.0),
)
