import io
import json
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from aqrm import formats
from aqrm import spectrum as sp
from aqrm.errors import DimensionError
from aqrm.quantifiers import QuantifierReport

GOLDEN = Path(__file__).parent / "golden"


def test_report_header_matches_golden():
    assert formats.report_csv([]) == (GOLDEN / "report_header.csv").read_text()


def test_spectrum_header_matches_golden():
    table = sp.spectrum_table(sp.ModelParams(), [0.0, 0.5], 2, refine_crossings=False)
    buf = io.StringIO()
    formats.write_spectrum_csv([(0.0, table)], sp.ModelParams(), "lambda1", buf)
    head = "".join(buf.getvalue().splitlines(keepends=True)[:2])
    assert head == (GOLDEN / "spectrum_header_2levels.csv").read_text()


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_floats_round_trip(x):
    text = formats.format_float(x)
    assert float(text) == x
    assert len(text.lstrip("-").split("e")[0].replace(".", "").lstrip("0")) <= 17


def test_missing_values():
    assert formats.format_float(None) == ""
    assert formats.format_float(math.nan) == ""
    assert formats.parse_float("") is None


def test_report_round_trip():
    rep = QuantifierReport(g2_dressed=1 / 3, g2_bare=None, zeta2=0.9, macroscopicity=-1e-300,
                           negativity=0.0, discord=math.pi, mean_photons=0.1,
                           convergence={"fock_cutoff": 17}, flags=["g2_bare_undefined"])
    row = formats.report_row(0.5, 0.25, 0.1, rep)
    text = formats.report_csv([row, row])
    back = formats.read_report_csv(io.StringIO(text))
    assert len(back) == 2
    assert back[0] == row


def test_reader_rejects_other_schema():
    with pytest.raises(ValueError):
        formats.read_report_csv(io.StringIO("# schema: aqrm-report/0\nlambda1\n"))
    text = formats.report_csv([]).replace("flags", "notes")
    with pytest.raises(ValueError):
        formats.read_report_csv(io.StringIO(text))


def test_csv_body_strips_comments():
    assert formats.csv_body("# a\nx,y\n1,2\n") == "x,y\n1,2\n"


def test_state_json_round_trip(rng):
    rho = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    obj = json.loads(json.dumps(formats.state_to_json(rho)))
    assert obj["dim"] == 4 and len(obj["entries_re"]) == 4
    assert np.array_equal(formats.state_from_json(obj), rho)
    with pytest.raises(DimensionError):
        formats.state_from_json({"dim": 3, "entries_re": rho.real.tolist(), "entries_im": rho.imag.tolist()})
    with pytest.raises(ValueError):
        formats.state_from_json({"dim": 4})


def test_spectrum_csv_round_trip():
    p = sp.ModelParams()
    t1 = sp.spectrum_table(p, np.linspace(0, 1, 5), 3, "lambda1", 0.5, refine_crossings=False)
    t2 = sp.spectrum_table(p, np.linspace(0, 1, 5), 3, "lambda1", 0.1, refine_crossings=False)
    buf = io.StringIO()
    formats.write_spectrum_csv([(0.5, t1), (0.1, t2)], p, "lambda1", buf)
    back = formats.read_spectrum_csv(io.StringIO(buf.getvalue()))
    assert np.array_equal(back["energies"][:5], t1.energies)
    assert np.array_equal(back["parities"][5:], t2.parities)
    assert np.array_equal(back["lambda2"][:5], 0.5 * t1.couplings)


def test_spec_hash_is_canonical():
    assert formats.spec_hash({"a": 1, "b": [1, 2]}) == formats.spec_hash({"b": [1, 2], "a": 1})
    assert formats.spec_hash({"a": 1}) != formats.spec_hash({"a": 2})
