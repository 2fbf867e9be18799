import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from lymdo.profiles import (
    DnnProfile,
    LayerProfile,
    ProfileError,
    bundled_profile,
    edge_macs,
    load_profile,
    local_macs,
    peak_activation,
    profile_from_dict,
    save_profile,
)

from conftest import make_profile


def _write(tmp_path, data, name="p.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return path


def test_minimal_profile(tmp_path):
    path = _write(tmp_path, {"name": "one", "layers": [
        {"macs": 0, "param_bytes": 0, "out_feature_bytes": 1000},
        {"macs": 10**6, "param_bytes": 0, "out_feature_bytes": 10},
    ]})
    p = load_profile(path)
    assert p.layer_count == 1
    assert p.total_macs == 10**6


def test_negative_macs_rejected_with_layer_index(tmp_path):
    path = _write(tmp_path, {"name": "bad", "layers": [
        {"macs": 0, "param_bytes": 0, "out_feature_bytes": 1000},
        {"macs": 5, "param_bytes": 0, "out_feature_bytes": 10},
        {"macs": -1, "param_bytes": 0, "out_feature_bytes": 10},
    ]})
    with pytest.raises(ProfileError) as err:
        load_profile(path)
    assert err.value.layer == 2


def test_missing_field_reports_layer(tmp_path):
    path = _write(tmp_path, {"name": "bad", "layers": [
        {"macs": 0, "param_bytes": 0, "out_feature_bytes": 1},
        {"macs": 5, "param_bytes": 0},
    ]})
    with pytest.raises(ProfileError) as err:
        load_profile(path)
    assert err.value.layer == 1


def test_invalid_json(tmp_path):
    path = tmp_path / "p.json"
    path.write_text("{not json")
    with pytest.raises(ProfileError):
        load_profile(path)


@pytest.mark.parametrize("layers", [
    [],
    [{"macs": 0, "param_bytes": 0, "out_feature_bytes": 1}],
    [{"macs": 3, "param_bytes": 0, "out_feature_bytes": 1}, {"macs": 1, "param_bytes": 0, "out_feature_bytes": 1}],
    [{"macs": 0, "param_bytes": 0, "out_feature_bytes": 1}, {"macs": 0, "param_bytes": 4, "out_feature_bytes": 1}],
    [{"macs": 0, "param_bytes": 0, "out_feature_bytes": 1}, {"macs": 1.5, "param_bytes": 4, "out_feature_bytes": 1}],
])
def test_structural_violations(layers):
    with pytest.raises(ProfileError):
        profile_from_dict({"name": "x", "layers": layers})


def test_unknown_version():
    with pytest.raises(ProfileError):
        profile_from_dict({"version": 9, "name": "x", "layers": []})


def test_local_macs_examples(tiny_profile):
    assert local_macs(tiny_profile, 0) == 0
    assert local_macs(tiny_profile, 3) == 23
    assert local_macs(tiny_profile, 1) == 5
    assert edge_macs(tiny_profile, 1) == 18


def test_cut_out_of_range(tiny_profile):
    with pytest.raises(ValueError):
        local_macs(tiny_profile, 4)
    with pytest.raises(ValueError):
        local_macs(tiny_profile, -1)


def test_peak_activation_examples(tiny_profile):
    assert peak_activation(tiny_profile, 2, 2) == 200
    assert peak_activation(tiny_profile, 1, 3) == 200
    assert peak_activation(tiny_profile, 4, 3) == 0  # empty edge range at cut = L
    with pytest.raises(ValueError):
        peak_activation(tiny_profile, 3, 1)


def test_payload_zero_when_fully_local(tiny_profile):
    assert tiny_profile.payload(0) == 100
    assert tiny_profile.payload(2) == 200
    assert tiny_profile.payload(3) == 0


# Independent per-layer arithmetic for the bundled networks. Conv MACs are
# k*k*c_in*c_out*h_out*w_out; FC MACs are in*out; tensors are float32.
def _conv(cin, cout, k, hout, bias=True):
    return k * k * cin * cout * hout * hout, 4 * (k * k * cin * cout + (cout if bias else 0))


def test_alexnet_matches_architecture_arithmetic():
    p = bundled_profile("alexnet")
    convs = [_conv(3, 64, 11, 55), _conv(64, 192, 5, 27), _conv(192, 384, 3, 13),
             _conv(384, 256, 3, 13), _conv(256, 256, 3, 13)]
    fcs = [(9216 * 4096, 4 * (9216 * 4096 + 4096)), (4096 * 4096, 4 * (4096 * 4096 + 4096)),
           (4096 * 1000, 4 * (4096 * 1000 + 1000))]
    expected = convs + fcs
    assert p.layer_count == 8
    assert [(l.macs, l.param_bytes) for l in p.layers[1:]] == expected
    assert p.layers[0].out_feature_bytes == 3 * 224 * 224 * 4
    # pooled outputs of the first, second and fifth convs
    assert [l.out_feature_bytes for l in p.layers[1:]] == [
        4 * 64 * 27 * 27, 4 * 192 * 13 * 13, 4 * 384 * 13 * 13, 4 * 256 * 13 * 13, 4 * 256 * 6 * 6,
        4 * 4096, 4 * 4096, 4 * 1000,
    ]
    assert p.total_param_bytes == 4 * 61_100_840


def test_resnet18_matches_architecture_arithmetic():
    p = bundled_profile("resnet18")
    assert p.layer_count == 10
    assert p.total_param_bytes == 4 * 11_689_512 + 4 * 2 * 4800  # weights plus BN running stats
    assert p.total_macs == 1_814_073_344
    stem = 7 * 7 * 3 * 64 * 112 * 112
    assert p.layers[1].macs == stem
    basic = 2 * (3 * 3 * 64 * 64 * 56 * 56)
    assert p.layers[2].macs == basic == p.layers[3].macs
    assert p.layers[10].macs == 512 * 1000
    assert p.layers[10].out_feature_bytes == 4000


def test_bundled_unknown():
    with pytest.raises(ProfileError):
        bundled_profile("vgg")


def test_roundtrip_bundled(tmp_path):
    for name in ("alexnet", "resnet18"):
        p = bundled_profile(name)
        save_profile(p, tmp_path / f"{name}.json")
        assert load_profile(tmp_path / f"{name}.json") == p


profiles = st.lists(
    st.tuples(st.integers(1, 10**9), st.integers(0, 10**8), st.integers(0, 10**7)), min_size=1, max_size=12
).flatmap(lambda rows: st.integers(1, 10**7).map(
    lambda inp: make_profile([0] + [r[0] for r in rows], [0] + [r[1] for r in rows], [inp] + [r[2] for r in rows])
))


@given(profiles)
def test_partition_conservation(p):
    total = local_macs(p, p.layer_count)
    for cut in range(p.layer_count + 1):
        assert local_macs(p, cut) + edge_macs(p, cut) == total
        assert p.local_params(cut) + p.edge_params(cut) == p.total_param_bytes


@given(profiles)
def test_local_macs_monotone(p):
    vals = [local_macs(p, c) for c in range(p.layer_count + 1)]
    assert vals == sorted(vals)


@given(profiles, st.data())
def test_peak_activation_widening(p, data):
    L = p.layer_count
    a = data.draw(st.integers(0, L))
    b = data.draw(st.integers(a, L))
    inner = peak_activation(p, a, b)
    lo = data.draw(st.integers(0, a))
    hi = data.draw(st.integers(b, L))
    assert peak_activation(p, lo, hi) >= inner


@given(profiles)
def test_dict_roundtrip(p):
    assert profile_from_dict(json.loads(json.dumps(p.to_dict()))) == p


def test_profile_is_immutable(tiny_profile):
    with pytest.raises(AttributeError):
        tiny_profile.name = "other"
    assert isinstance(tiny_profile.layers[0], LayerProfile)
    assert isinstance(tiny_profile, DnnProfile)
