"""Compare the analytic network Jacobian with central differences over a sweep of architectures."""

import argparse

import numpy as np

from resnet_adaptive.network import NetworkSpec, ParamVector, param_count, resnet_eval, resnet_forward


def central_difference(spec, theta, x, h=1e-6):
    cols = []
    for k in range(theta.size):
        tp, tm = theta.copy(), theta.copy()
        tp[k] += h
        tm[k] -= h
        yp = resnet_forward(spec, ParamVector.from_theta(spec, tp), x)[0]
        ym = resnet_forward(spec, ParamVector.from_theta(spec, tm), x)[0]
        cols.append((yp - ym) / (2 * h))
    return np.stack(cols, axis=1)


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--draws", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()
    rng = np.random.default_rng(args.seed)
    print(f"{'b':>2} {'width':>5} {'act':>6} {'params':>6}  max rel err")
    for b in (0, 1, 2, 4):
        for width in (1, 2, 8):
            for act in ("tanh", "swish"):
                spec = NetworkSpec.uniform(8, 2, width, 2, b, act, None, act)
                worst = 0.0
                for _ in range(args.draws):
                    theta = rng.uniform(-1, 1, param_count(spec))
                    x = rng.uniform(-2, 2, 8)
                    _, jac = resnet_eval(spec, ParamVector.from_theta(spec, theta), x)
                    fd = central_difference(spec, theta, x)
                    den = np.maximum(np.maximum(np.abs(jac), np.abs(fd)), 1.0)
                    worst = max(worst, float(np.max(np.abs(jac - fd) / den)))
                print(f"{b:>2} {width:>5} {act:>6} {param_count(spec):>6}  {worst:.2e}")


if __name__ == "__main__":
    main()
