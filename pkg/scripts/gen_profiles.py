"""Generate the bundled layer profiles for AlexNet and ResNet18.

Walks the torchvision variants of both networks with the usual conv/fc
arithmetic and writes ``src/lymdo/data/{alexnet,resnet18}.json``.

Conventions:
  * tensors (input, feature maps, weights) are float32, 4 bytes per element;
  * batch norm is folded into the preceding conv for MACs, but its four
    per-channel vectors are still counted as parameters;
  * ReLU, pooling and residual additions are merged into the preceding
    logical layer and contribute no MACs;
  * layer 0 is the virtual input layer (3x224x224 image tensor).

Run from the repository root::

    python scripts/gen_profiles.py
"""
import json
from pathlib import Path

BYTES = 4
DATA = Path(__file__).resolve().parents[1] / "src" / "lymdo" / "data"


def conv_out(size, k, s, p):
    return (size + 2 * p - k) // s + 1


def conv(c_in, c_out, k, size, s=1, p=0, bias=True, bn=False):
    """Return (macs, params, out_size) of a square conv."""
    out = conv_out(size, k, s, p)
    macs = c_out * out * out * c_in * k * k
    params = c_out * c_in * k * k + (c_out if bias else 0) + (4 * c_out if bn else 0)
    return macs, params, out


def fc(n_in, n_out):
    return n_in * n_out, n_in * n_out + n_out


def layer(macs, params, out_elems):
    return {"macs": int(macs), "param_bytes": int(params * BYTES),
            "out_feature_bytes": int(out_elems * BYTES)}


def alexnet():
    layers = [layer(0, 0, 3 * 224 * 224)]
    size = 224
    # conv1 + relu + maxpool(3, 2)
    m, p, size = conv(3, 64, 11, size, s=4, p=2)
    size = conv_out(size, 3, 2, 0)
    layers.append(layer(m, p, 64 * size * size))
    # conv2 + relu + maxpool
    m, p, size = conv(64, 192, 5, size, p=2)
    size = conv_out(size, 3, 2, 0)
    layers.append(layer(m, p, 192 * size * size))
    # conv3, conv4 (+ relu)
    m, p, size = conv(192, 384, 3, size, p=1)
    layers.append(layer(m, p, 384 * size * size))
    m, p, size = conv(384, 256, 3, size, p=1)
    layers.append(layer(m, p, 256 * size * size))
    # conv5 + relu + maxpool -> 256x6x6
    m, p, size = conv(256, 256, 3, size, p=1)
    size = conv_out(size, 3, 2, 0)
    layers.append(layer(m, p, 256 * size * size))
    flat = 256 * size * size
    for n_in, n_out in ((flat, 4096), (4096, 4096), (4096, 1000)):
        m, p = fc(n_in, n_out)
        layers.append(layer(m, p, n_out))
    return {"name": "alexnet", "layers": layers}


def basic_block(c_in, c_out, size, stride):
    m1, p1, out = conv(c_in, c_out, 3, size, s=stride, p=1, bias=False, bn=True)
    m2, p2, out = conv(c_out, c_out, 3, out, p=1, bias=False, bn=True)
    macs, params = m1 + m2, p1 + p2
    if stride != 1 or c_in != c_out:
        md, pd, _ = conv(c_in, c_out, 1, size, s=stride, bias=False, bn=True)
        macs, params = macs + md, params + pd
    return macs, params, out


def resnet18():
    layers = [layer(0, 0, 3 * 224 * 224)]
    # stem: conv7x7/2 + bn + relu + maxpool(3, 2, pad 1)
    m, p, size = conv(3, 64, 7, 224, s=2, p=3, bias=False, bn=True)
    size = conv_out(size, 3, 2, 1)
    layers.append(layer(m, p, 64 * size * size))
    c_in = 64
    for c_out, stride in ((64, 1), (128, 2), (256, 2), (512, 2)):
        for s in (stride, 1):
            m, p, size = basic_block(c_in, c_out, size, s)
            layers.append(layer(m, p, c_out * size * size))
            c_in = c_out
    # global avgpool + fc
    m, p = fc(512, 1000)
    layers.append(layer(m, p, 1000))
    return {"name": "resnet18", "layers": layers}


def main():
    DATA.mkdir(parents=True, exist_ok=True)
    for prof in (alexnet(), resnet18()):
        path = DATA / f"{prof['name']}.json"
        path.write_text(json.dumps({"version": 1, **prof}, indent=2) + "\n")
        macs = sum(l["macs"] for l in prof["layers"])
        params = sum(l["param_bytes"] for l in prof["layers"]) // BYTES
        print(f"{path.name}: L={len(prof['layers']) - 1} MACs={macs:,} params={params:,}")


if __name__ == "__main__":
    main()
