"""IO-format tests: PNG round-trips, checkpoint bit-exactness plus its
corruption taxonomy, CSV report formatting, config parsing, and paired
dataset validation."""

import numpy as np
import pytest

from notchkit.errors import ConfigError, DataError, DimensionError
from notchkit.io import (ModelCheckpoint, format_value, load_checkpoint,
                         load_config, load_image, parse_config_text,
                         read_report, save_checkpoint, save_image,
                         save_spectrum_png, write_report)
from notchkit.io.dataset import PairedDataset
from notchkit.spectral import fft2d

# ---------------------------------------------------------------------------
# PNG round-trips
# ---------------------------------------------------------------------------

def test_png_roundtrip_rgb(tmp_path):
    rng = np.random.default_rng(3)
    img = rng.uniform(0, 1, (32, 24, 3)).astype(np.float32)
    path = tmp_path / "a" / "img.png"   # parent dir is created on demand
    save_image(img, path)
    back = load_image(path)
    assert back.shape == (32, 24, 3) and back.dtype == np.float32
    assert np.max(np.abs(back.astype(np.float64) - img)) <= 0.5 / 255.0 + 1e-6


def test_png_roundtrip_grayscale(tmp_path):
    rng = np.random.default_rng(4)
    img = rng.uniform(0, 1, (16, 16, 1)).astype(np.float32)
    save_image(img, tmp_path / "g.png")
    back = load_image(tmp_path / "g.png")
    assert back.shape == (16, 16, 1)
    assert np.max(np.abs(back.astype(np.float64) - img)) <= 0.5 / 255.0 + 1e-6


def test_png_quantisation_is_idempotent(tmp_path):
    # a second save/load of already-quantised data changes nothing
    rng = np.random.default_rng(5)
    save_image(rng.uniform(0, 1, (16, 16, 3)).astype(np.float32), tmp_path / "a.png")
    once = load_image(tmp_path / "a.png")
    save_image(once, tmp_path / "b.png")
    assert np.array_equal(load_image(tmp_path / "b.png"), once)


def test_png_rejects_out_of_range():
    with pytest.raises(DimensionError):
        save_image(np.full((16, 16, 3), 1.5, dtype=np.float32), "unused.png")


def test_png_missing_and_corrupt_files(tmp_path):
    with pytest.raises(DataError):
        load_image(tmp_path / "nope.png")
    bad = tmp_path / "bad.png"
    bad.write_bytes(b"this is not a png")
    with pytest.raises(DataError):
        load_image(bad)


def test_save_spectrum_png(tmp_path):
    rng = np.random.default_rng(6)
    spec = fft2d(rng.uniform(0, 1, (32, 32)).astype(np.float32))
    save_spectrum_png(spec, tmp_path / "spec.png")
    vis = load_image(tmp_path / "spec.png")
    assert vis.shape == (32, 32, 1)
    assert float(vis.max()) == 1.0   # normalised to the brightest bin


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

def _sample_checkpoint():
    rng = np.random.default_rng(12)
    return ModelCheckpoint(
        kind="kpn",
        meta={"scales": "3", "kernel": "5", "note": "has = inside"},
        params={
            "enc0.weight": rng.standard_normal((16, 3, 3, 3)).astype(np.float32),
            "enc0.bias": np.zeros(16, dtype=np.float32),
            "head.weight": rng.standard_normal((25, 16, 1, 1)).astype(np.float32),
        },
    )


def test_checkpoint_roundtrip_bit_exact(tmp_path):
    ckpt = _sample_checkpoint()
    path = tmp_path / "m" / "model.nfck"
    save_checkpoint(ckpt, path)
    back = load_checkpoint(path)
    assert back.kind == ckpt.kind
    assert back.meta == ckpt.meta
    assert list(back.params) == list(ckpt.params)   # order preserved
    for name in ckpt.params:
        assert np.array_equal(back.params[name], ckpt.params[name])
        assert back.params[name].dtype == np.float32


def test_checkpoint_same_bytes_for_same_model(tmp_path):
    ckpt = _sample_checkpoint()
    save_checkpoint(ckpt, tmp_path / "a.nfck")
    save_checkpoint(ckpt, tmp_path / "b.nfck")
    assert (tmp_path / "a.nfck").read_bytes() == (tmp_path / "b.nfck").read_bytes()


def test_checkpoint_via_to_checkpoint_hook(tmp_path):
    class Shim:
        def to_checkpoint(self):
            return _sample_checkpoint()

    save_checkpoint(Shim(), tmp_path / "s.nfck")
    assert load_checkpoint(tmp_path / "s.nfck").kind == "kpn"
    with pytest.raises(DataError):
        save_checkpoint(object(), tmp_path / "t.nfck")


def test_checkpoint_rejects_bad_construction():
    with pytest.raises(DataError):
        ModelCheckpoint(kind="transformer")
    with pytest.raises(DataError):
        ModelCheckpoint(kind="kpn", params={"w": np.zeros(3, dtype=np.float64)})


def test_checkpoint_missing_file(tmp_path):
    with pytest.raises(DataError):
        load_checkpoint(tmp_path / "nothing.nfck")


def _corrupt(data: bytes, mutate) -> bytes:
    buf = bytearray(data)
    mutate(buf)
    return bytes(buf)


def test_checkpoint_corruption_taxonomy(tmp_path):
    path = tmp_path / "m.nfck"
    save_checkpoint(_sample_checkpoint(), path)
    good = path.read_bytes()

    cases = {
        "bad magic": _corrupt(good, lambda b: b.__setitem__(0, 0x58)),
        "bad version": _corrupt(good, lambda b: b.__setitem__(4, 0xEE)),
        "unknown kind": _corrupt(good, lambda b: b.__setitem__(6, 0x7F)),
        "truncated payload": good[:-17],
        "truncated header": good[:9],
        "trailing bytes": good + b"\x00\x00",
    }
    for label, payload in cases.items():
        bad = tmp_path / "bad.nfck"
        bad.write_bytes(payload)
        with pytest.raises(DataError):
            load_checkpoint(bad)


def test_checkpoint_malformed_metadata(tmp_path):
    # metadata lines must be key=value; splice in one that is not
    path = tmp_path / "m.nfck"
    save_checkpoint(ModelCheckpoint(kind="detector", meta={"a": "1"}), path)
    data = bytearray(path.read_bytes())
    # meta block is b"a=1" at offset 9; overwrite '=' with '_'
    assert data[9:12] == b"a=1"
    data[10] = ord("_")
    path.write_bytes(bytes(data))
    with pytest.raises(DataError):
        load_checkpoint(path)


# ---------------------------------------------------------------------------
# CSV reports
# ---------------------------------------------------------------------------

def test_format_value_rules():
    assert format_value(1.0) == "1.0000"
    assert format_value(np.float32(0.25)) == "0.2500"
    assert format_value(2.0 / 3.0) == "0.6667"
    assert format_value(float("inf")) == "inf"
    assert format_value(float("-inf")) == "-inf"
    assert format_value(7) == "7"
    assert format_value(np.int64(-3)) == "-3"
    assert format_value(True) == "1"
    assert format_value("DN(rn)-gau") == "DN(rn)-gau"
    with pytest.raises(DataError):
        format_value(float("nan"))


def test_write_report_bytes_and_roundtrip(tmp_path):
    rows = [
        {"name": "a", "psnr": 31.25, "hit": True, "n": 3},
        {"name": "b", "psnr": float("inf"), "hit": False, "n": 0},
    ]
    write_report(rows, tmp_path / "r.csv")
    write_report(rows, tmp_path / "r2.csv")
    data = (tmp_path / "r.csv").read_bytes()
    assert data == (tmp_path / "r2.csv").read_bytes()
    assert data == b"name,psnr,hit,n\na,31.2500,1,3\nb,inf,0,0\n"
    back = read_report(tmp_path / "r.csv")
    assert back == [
        {"name": "a", "psnr": "31.2500", "hit": "1", "n": "3"},
        {"name": "b", "psnr": "inf", "hit": "0", "n": "0"},
    ]


def test_write_report_schema_enforcement(tmp_path):
    with pytest.raises(DataError):
        write_report([{"a": 1}, {"b": 2}], tmp_path / "r.csv")
    with pytest.raises(DataError):
        write_report([], tmp_path / "r.csv")           # needs explicit columns
    write_report([], tmp_path / "r.csv", columns=["a", "b"])
    assert (tmp_path / "r.csv").read_text() == "a,b\n"
    # explicit column order wins over dict order
    write_report([{"b": 2, "a": 1}], tmp_path / "o.csv", columns=["a", "b"])
    assert (tmp_path / "o.csv").read_text() == "a,b\n1,2\n"


def test_read_report_missing_file(tmp_path):
    with pytest.raises(DataError):
        read_report(tmp_path / "nope.csv")


# ---------------------------------------------------------------------------
# config files
# ---------------------------------------------------------------------------

def test_parse_config_basics():
    text = "\n".join([
        "# a comment",
        "",
        "variant = DN(rn)-gau",
        "sigma=10",
        "path = /tmp/out = dir",   # only the first '=' splits
    ])
    cfg = parse_config_text(text)
    assert cfg == {"variant": "DN(rn)-gau", "sigma": "10",
                   "path": "/tmp/out = dir"}


@pytest.mark.parametrize("text,fragment", [
    ("just words\n", ":1:"),
    ("a=1\nnot a pair\n", ":2:"),
    ("a=1\na=2\n", "duplicate"),
    (" = value\n", "empty key"),
])
def test_parse_config_errors_carry_location(text, fragment):
    with pytest.raises(ConfigError) as exc:
        parse_config_text(text, source="run.cfg")
    assert "run.cfg" in str(exc.value)
    assert fragment in str(exc.value)


def test_load_config(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("n=12\nseed=7\n")
    assert load_config(path) == {"n": "12", "seed": "7"}
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.cfg")


# ---------------------------------------------------------------------------
# paired datasets
# ---------------------------------------------------------------------------

def _write_pair_tree(root, filenames, size=(16, 16), fake_size=None):
    rows = []
    rng = np.random.default_rng(0)
    for name in filenames:
        for side, hw in (("real", size), ("fake", fake_size or size)):
            img = rng.uniform(0.2, 0.8, (*hw, 3)).astype(np.float32)
            save_image(img, root / side / name)
        rows.append({"filename": name, "kind": "checkerboard", "stride": 2,
                     "kernel": 3, "gain": 0.5, "seed": 1})
    write_report(rows, root / "manifest.csv")


def test_dataset_open_and_load(tmp_path):
    _write_pair_tree(tmp_path, ["00000.png", "00001.png"])
    ds = PairedDataset.open(tmp_path)
    assert len(ds) == 2
    assert ds.entries[0].kernel_size == 3 and ds.entries[0].gain == 0.5
    real, fake = ds.load_pair(1)
    assert real.shape == fake.shape == (16, 16, 3)
    reals, fakes = ds.load_all()
    assert reals.shape == fakes.shape == (2, 16, 16, 3)
    reals1, _ = ds.load_all(limit=1)
    assert reals1.shape == (1, 16, 16, 3)
    assert np.array_equal(reals1[0], ds.load_real(0))
    assert np.array_equal(fakes[1], ds.load_fake(1))


def test_dataset_missing_manifest(tmp_path):
    with pytest.raises(DataError):
        PairedDataset.open(tmp_path)


def test_dataset_empty_manifest(tmp_path):
    write_report([], tmp_path / "manifest.csv",
                  columns=["filename", "kind", "stride", "kernel", "gain", "seed"])
    with pytest.raises(DataError):
        PairedDataset.open(tmp_path)


def test_dataset_bad_manifest_row(tmp_path):
    _write_pair_tree(tmp_path, ["00000.png"])
    (tmp_path / "manifest.csv").write_text(
        "filename,kind,stride,kernel,gain,seed\n00000.png,checkerboard,two,3,0.5,1\n")
    with pytest.raises(DataError) as exc:
        PairedDataset.open(tmp_path)
    assert "row 0" in str(exc.value)


def test_dataset_missing_column(tmp_path):
    _write_pair_tree(tmp_path, ["00000.png"])
    (tmp_path / "manifest.csv").write_text("filename,kind\n00000.png,checkerboard\n")
    with pytest.raises(DataError):
        PairedDataset.open(tmp_path)


def test_dataset_missing_file(tmp_path):
    _write_pair_tree(tmp_path, ["00000.png", "00001.png"])
    (tmp_path / "fake" / "00001.png").unlink()
    with pytest.raises(DataError) as exc:
        PairedDataset.open(tmp_path)
    assert "missing" in str(exc.value)


def test_dataset_size_mismatch(tmp_path):
    _write_pair_tree(tmp_path, ["00000.png"], size=(16, 16), fake_size=(16, 24))
    with pytest.raises(DataError) as exc:
        PairedDataset.open(tmp_path)
    assert "00000.png" in str(exc.value)
