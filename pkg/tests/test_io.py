import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mapraster.elements import Vocabulary
from mapraster.geometry import Polygon, Polyline
from mapraster.io import (ElementRecord, SceneError, SceneFile, dumps, load_config, load_scene, pair_scenes,
                          parse_config, parse_scene, round_sig, write_csv, write_scene)

VOCAB_DOC = [{"name": "divider", "kind": "line"}, {"name": "ped_crossing", "kind": "polygon"}]


def doc(elements, scene_id="s0"):
    return {"scene_id": scene_id, "vocabulary": VOCAB_DOC, "elements": elements}


class TestLoadScene:
    def test_minimal(self, tmp_path):
        p = tmp_path / "s.json"
        p.write_text(json.dumps(doc([{"class": "divider", "kind": "line", "points": [[0, 0], [1, 2]]}])))
        s = load_scene(p)
        assert s.scene_id == "s0" and len(s.elements) == 1
        assert isinstance(s.elements[0].geometry, Polyline) and len(s.elements[0].geometry) == 2

    def test_two_point_polygon(self):
        bad = doc([{"class": "ped_crossing", "kind": "polygon", "points": [[0, 0], [1, 0]]}])
        with pytest.raises(SceneError, match=r"element 0: polygon requires >= 3 vertices"):
            parse_scene(bad, "f.json")

    def test_dedup_reported(self):
        s = parse_scene(doc([{"class": "divider", "kind": "line", "points": [[0, 0], [0, 0], [1, 1], [1, 1], [2, 0]]}]))
        assert len(s.elements[0].geometry) == 3
        assert s.elements[0].n_removed == 2 and s.n_removed == 2

    def test_error_names_path_and_index(self):
        bad = doc([{"class": "divider", "kind": "line", "points": [[0, 0], [1, 1]]},
                   {"class": "road", "kind": "line", "points": [[0, 0], [1, 1]]}])
        with pytest.raises(SceneError, match=r"^f\.json: element 1: unknown class 'road'"):
            parse_scene(bad, "f.json")

    @pytest.mark.parametrize("element, message", [
        ({"class": "divider", "kind": "polygon", "points": [[0, 0], [1, 0], [0, 1]]}, "declared line"),
        ({"class": "divider", "kind": "curve", "points": [[0, 0], [1, 0]]}, "kind"),
        ({"class": "divider", "kind": "line", "points": [[0, 0], [1]]}, "pairs"),
        ({"class": "divider", "kind": "line", "points": [[0, 0], ["a", 1]]}, "pairs"),
        ({"class": "divider", "kind": "line", "points": [[0, 0], [1e400, 1]]}, "finite"),
        ({"class": "divider", "kind": "line", "points": [[0, 0], [1, 1]], "confidence": 1.5}, "confidence"),
        ({"class": "divider", "kind": "line", "points": [[0, 0], [1, 1]], "color": "red"}, "unknown keys"),
    ])
    def test_invalid_elements(self, element, message):
        with pytest.raises(SceneError, match=message):
            parse_scene(doc([element]))

    def test_roles(self):
        el = {"class": "divider", "kind": "line", "points": [[0, 0], [1, 1]]}
        with pytest.raises(SceneError, match="require a confidence"):
            parse_scene(doc([el]), role="pred")
        with pytest.raises(SceneError, match="must not carry"):
            parse_scene(doc([el | {"confidence": 0.5}]), role="gt")
        assert parse_scene(doc([el | {"confidence": 0.5}]), role="pred").elements[0].confidence == 0.5

    def test_malformed_json(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{not json")
        with pytest.raises(SceneError, match="bad.json: malformed JSON"):
            load_scene(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(SceneError, match="not found"):
            load_scene(tmp_path / "none.json")

    @pytest.mark.parametrize("mutate", [
        lambda d: d.pop("scene_id"), lambda d: d.update(vocabulary=[]),
        lambda d: d.update(elements={}), lambda d: d.update(vocabulary=[{"name": "x", "kind": "blob"}])])
    def test_top_level(self, mutate):
        d = doc([])
        mutate(d)
        with pytest.raises(SceneError):
            parse_scene(d)


finite = st.floats(-1e3, 1e3, allow_nan=False)


@st.composite
def scenes(draw):
    vocab = Vocabulary(("divider", "ped_crossing"), ("line", "polygon"))
    records = []
    for _ in range(draw(st.integers(0, 4))):
        if draw(st.booleans()):
            pts = draw(st.lists(st.tuples(finite, finite), min_size=2, max_size=6, unique=True))
            try:
                geom = Polyline(pts)
            except ValueError:
                continue
            rec = ElementRecord("divider", "line", geom)
        else:
            pts = draw(st.lists(st.tuples(finite, finite), min_size=3, max_size=6, unique=True))
            try:
                geom = Polygon(pts)
            except ValueError:
                continue
            rec = ElementRecord("ped_crossing", "polygon", geom)
        rec.confidence = draw(st.one_of(st.none(), st.floats(0, 1)))
        records.append(rec)
    return SceneFile(draw(st.text("abc123_", min_size=1, max_size=8)), vocab, records)


class TestRoundTrip:
    @given(scenes())
    def test_round_trip(self, scene):
        import tempfile
        from pathlib import Path
        with tempfile.TemporaryDirectory() as d:
            path = Path(d) / "s.json"
            write_scene(scene, path)
            back = load_scene(path)
        assert back.scene_id == scene.scene_id and back.vocabulary == scene.vocabulary
        assert len(back.elements) == len(scene.elements)
        for a, b in zip(scene.elements, back.elements):
            assert (a.class_name, a.kind, a.confidence) == (b.class_name, b.kind, b.confidence)
            assert np.array_equal(a.geometry.points, b.geometry.points)


class TestPairing:
    def _scene(self, sid, conf=None):
        el = {"class": "divider", "kind": "line", "points": [[0, 0], [1, 1]]}
        if conf is not None:
            el["confidence"] = conf
        return parse_scene(doc([el], sid))

    def test_missing_pred_scene_is_empty(self):
        scenes, _ = pair_scenes([self._scene("a"), self._scene("b")], [self._scene("a", 0.9)])
        assert [len(s.detections) for s in scenes] == [1, 0]

    def test_orphan_prediction(self):
        with pytest.raises(SceneError, match="without ground truth"):
            pair_scenes([self._scene("a")], [self._scene("z", 0.5)])

    def test_duplicates(self):
        with pytest.raises(SceneError):
            pair_scenes([self._scene("a"), self._scene("a")], [])


class TestConfig:
    def test_defaults(self):
        cfg = load_config(None)
        assert cfg.grid.shape == (480, 240) and cfg.train_grid.shape == (256, 128)
        assert cfg.tau == 2.0 and cfg.line_dilation_px == 2

    def test_overrides(self):
        cfg = parse_config({"tau": 1.0, "line_iou_thresholds": "0.3:0.5:0.1", "workers": 4,
                            "grid": {"x_min": -1, "x_max": 1, "y_min": -2, "y_max": 2, "width": 8, "height": 16},
                            "fit": {"iterations": 10}})
        assert cfg.line_iou_thresholds == (0.3, 0.4, 0.5)
        assert cfg.eval_config().grid.shape == (16, 8)
        assert cfg.fit.iterations == 10 and cfg.workers == 4

    @pytest.mark.parametrize("bad", [
        {"tau": 0}, {"tau": "two"}, {"workers": 0}, {"colour": 1}, {"line_iou_thresholds": [0.5, 0.3]},
        {"grid": {"x_min": 0}}, {"grid": {"x_min": 1, "x_max": 0, "y_min": 0, "y_max": 1, "width": 2, "height": 2}},
        {"loss_weights": [0, 0, 0, 0]}, {"fit": {"iterations": 0}}, {"fit": {"speed": 1}},
        {"dilation_kernel": "star"}, {"chamfer_thresholds_m": [-1]}])
    def test_validation(self, bad):
        with pytest.raises(SceneError):
            parse_config(bad)

    def test_to_dict_mirrors_keys(self):
        cfg = load_config(None)
        d = cfg.to_dict()
        assert parse_config({k: v for k, v in d.items()}).to_dict() == d


class TestWriters:
    def test_round_sig(self):
        assert round_sig(1 / 3) == 0.333333333
        assert round_sig(123456789.123) == 123456789.0
        assert round_sig(0.0) == 0.0

    def test_dumps_stable(self):
        a = dumps({"b": 1 / 3, "a": [np.float64(2 / 3), 1]})
        assert a == dumps({"a": [2 / 3, 1], "b": 1 / 3})
        assert json.loads(a) == {"a": [0.666666667, 1], "b": 0.333333333}
        assert a.index('"a"') < a.index('"b"')

    def test_csv(self, tmp_path):
        write_csv([("x", 0.1, 1 / 3)], ("class", "recall", "precision"), tmp_path / "c.csv")
        assert (tmp_path / "c.csv").read_text() == "class,recall,precision\nx,0.1,0.333333333\n"
