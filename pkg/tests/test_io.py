import json
import os

import numpy as np
import pytest
from hdsvar.bootstrap import BootstrapDistribution
from hdsvar.dgp import DgpSpec, generate, simulate
from hdsvar.errors import DataError
from hdsvar.inference import NetworkEdge
from hdsvar.io import (
    FIT_FILE,
    RESIDUALS_FILE,
    SHOCKS_FILE,
    read_dgp,
    read_fit,
    read_json,
    read_panel,
    write_dgp,
    write_edges,
    write_fit,
    write_panel,
    write_replicates,
)
from hdsvar.model_core import TimeSeriesPanel
from hdsvar.pipeline import PipelineConfig, Target, estimate

spec = DgpSpec(p=5, n=120, lags=1, k_a=2, radius=0.5, n_shocks=2, shock=0, k_b=3, k_d=2)
dgp = generate(spec, 2)
panel = simulate(dgp, rng=2)


def write(tmp_path, text, name="data.csv"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


class Test_read_panel:
    def test_read_panel_header(self, tmp_path):
        result = read_panel(write(tmp_path, "a,b\n1,2\n3,4.5\n-1e-2,0\n"))
        assert result.columns == ("a", "b")
        assert np.array_equal(result.data, [[1, 2], [3, 4.5], [-0.01, 0]])

    def test_read_panel_no_header(self, tmp_path):
        result = read_panel(write(tmp_path, "1,2\n3,4\n"))
        assert result.columns is None
        assert result.data.shape == (2, 2)

    def test_read_panel_non_numeric_line(self, tmp_path):
        path = write(tmp_path, "a,b\n1,2\n3,4\n5,x\n")
        with pytest.raises(DataError, match="line 4, column 2"):
            read_panel(path)

    def test_read_panel_missing_cell(self, tmp_path):
        path = write(tmp_path, "1,2\n3,\n")
        with pytest.raises(DataError, match="line 2"):
            read_panel(path)

    def test_read_panel_short_row(self, tmp_path):
        path = write(tmp_path, "a,b,c\n1,2,3\n4,5\n")
        with pytest.raises(DataError, match="line 3"):
            read_panel(path)

    @pytest.mark.parametrize("text", ["", "a,b\n"])
    def test_read_panel_empty(self, tmp_path, text):
        with pytest.raises(DataError):
            read_panel(write(tmp_path, text))

    def test_read_panel_missing_file(self, tmp_path):
        with pytest.raises(DataError):
            read_panel(str(tmp_path / "absent.csv"))

    def test_write_panel_default_columns(self, tmp_path):
        path = str(tmp_path / "out.csv")
        write_panel(TimeSeriesPanel(np.eye(2)), path)
        assert open(path).readline().strip() == "x1,x2"
        assert np.array_equal(read_panel(path).data, np.eye(2))


class Test_json_documents:
    def test_read_json_malformed(self, tmp_path):
        with pytest.raises(DataError):
            read_json(write(tmp_path, "{", "bad.json"))

    def test_read_json_missing(self, tmp_path):
        with pytest.raises(DataError):
            read_json(str(tmp_path / "absent.json"))

    def test_dgp_file(self, tmp_path):
        path = str(tmp_path / "dgp.json")
        write_dgp(dgp, path)
        loaded = read_dgp(path)
        assert loaded.spec == spec
        assert loaded.seed == 2
        assert np.array_equal(loaded.model.stacked, dgp.model.stacked)
        assert np.array_equal(loaded.impact, dgp.impact)
        assert np.array_equal(loaded.sigma_w, dgp.sigma_w)

    def test_dgp_file_incomplete(self, tmp_path):
        path = write(tmp_path, json.dumps({"seed": 1}), "dgp.json")
        with pytest.raises(DataError):
            read_dgp(path)


class Test_fit_artifacts:
    config = PipelineConfig(lags=1, shock_index=(0, 1), horizon=4)

    def test_fit_files(self, tmp_path):
        estimates = estimate(panel, self.config)
        write_fit(estimates, str(tmp_path))
        for name in (FIT_FILE, SHOCKS_FILE, RESIDUALS_FILE):
            assert os.path.exists(os.path.join(str(tmp_path), name))

        document = read_json(os.path.join(str(tmp_path), FIT_FILE))
        assert document["shock_index"] == [0, 1]
        assert len(document["rows"]) == 5
        with open(os.path.join(str(tmp_path), SHOCKS_FILE)) as handle:
            assert handle.readline().strip() == "u1,u2"

    def test_fit_reload(self, tmp_path):
        estimates = estimate(panel, self.config)
        write_fit(estimates, str(tmp_path))
        loaded = read_fit(str(tmp_path), panel)
        assert np.allclose(loaded.model.stacked, estimates.model.stacked)
        assert np.allclose(loaded.structure.impact, estimates.structure.impact)
        assert np.allclose(loaded.covariances.sigma_w, estimates.covariances.sigma_w)
        assert loaded.tuning.lambda_b == estimates.tuning.lambda_b

    def test_fit_reload_new_horizon(self, tmp_path):
        write_fit(estimate(panel, self.config), str(tmp_path))
        assert read_fit(str(tmp_path), panel, horizon=7).ma.horizon == 7

    def test_fit_reload_wrong_panel(self, tmp_path):
        write_fit(estimate(panel, self.config), str(tmp_path))
        with pytest.raises(DataError):
            read_fit(str(tmp_path), TimeSeriesPanel(panel.data[:, :4]))

    def test_fit_missing(self, tmp_path):
        with pytest.raises(DataError):
            read_fit(str(tmp_path), panel)


class Test_result_tables:
    def test_replicates(self, tmp_path):
        targets = (Target(0, 0, 0), Target(2, 4, 1))
        dist = BootstrapDistribution(
            targets,
            np.array([[1.0, 2.0], [3.0, 4.0]]),
            np.array([0, 2]),
            np.zeros(2),
            100,
        )
        path = str(tmp_path / "replicates.csv")
        write_replicates(dist, path)
        lines = open(path).read().splitlines()
        assert lines[0] == "replicate,h,j,r,value"
        assert lines[1:] == ["1,0,1,1,1.0", "1,2,5,2,2.0", "3,0,1,1,3.0", "3,2,5,2,4.0"]

    def test_edges(self, tmp_path):
        path = str(tmp_path / "edges.txt")
        write_edges([NetworkEdge(0, 1, 0.25), NetworkEdge(3, 0, 0.5)], path)
        assert open(path).read().splitlines() == ["1 2 0.25", "4 1 0.5"]
