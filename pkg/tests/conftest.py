import pytest
from hypothesis import strategies as st

from unbalanced_decomp import GridShape, Layout

LAYOUTS = [v.value for v in Layout]


@pytest.fixture
def recon_shape():
    # Benchmark index dimensions: l=32, e=8, s=2; ig*Y = 992 with odd ig forces nig=31, naky=32.
    return GridShape.from_dealiased(nakx=32, naky=32, nig=31, nlambda=32, negrid=8, nspec=2)


@pytest.fixture
def desk_shape():
    return GridShape(nakx=8, naky=8, inx=12, iny=12, nig=7, nlambda=4, negrid=2, nspec=2)


@st.composite
def small_shapes(draw, max_extent=6):
    nakx = draw(st.integers(1, max_extent))
    naky = draw(st.integers(1, max_extent))
    return GridShape(
        nakx=nakx,
        naky=naky,
        inx=nakx + draw(st.integers(0, 3)),
        iny=naky + draw(st.integers(0, 3)),
        nig=draw(st.sampled_from([1, 3, 5, 7])),
        nlambda=draw(st.integers(1, 4)),
        negrid=draw(st.integers(1, 3)),
        nspec=draw(st.integers(1, 2)),
    )


layouts = st.sampled_from(LAYOUTS)
spaces = st.sampled_from(["g_lo", "xxf_lo", "yxf_lo"])


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
