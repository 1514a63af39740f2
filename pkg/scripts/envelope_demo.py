"""Simulate a high-gain ResNet run and compare ||(e, r)|| with the exponential envelope.

Writes ``envelope.svg`` to the output directory when matplotlib is available.
"""

import argparse
import math
from pathlib import Path

import numpy as np

from resnet_adaptive.adaptation import LearningRate, SearchSpace
from resnet_adaptive.control import ControllerKind, Gains
from resnet_adaptive.network import NetworkSpec, param_count
from resnet_adaptive.simulate import Scenario, SimConfig, run_simulation
from resnet_adaptive.stability import (
    RemainderPolynomial,
    check_gain_condition,
    convergence_envelope,
    set_radii,
    stability_constants,
)


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--duration", type=float, default=60.0)
    p.add_argument("--a1", type=float, default=0.01, help="linear remainder coefficient")
    p.add_argument("--out", default="results/envelope")
    args = p.parse_args()

    gains, theta_bar, lambda_v = Gains(2.0, 6.0, 2.0), 1.0, 0.5
    net = NetworkSpec.uniform(8, 2, 2, 2, 4, "swish", "tanh", "swish")
    scenario = Scenario()
    cfg = SimConfig(ControllerKind("ResNet", net), gains, duration=args.duration, learning_rate=1.0,
                    search_space=SearchSpace(theta_bar), scenario=scenario)
    log = run_simulation(cfg)
    plant, ref = scenario.build()
    h = max(np.linalg.norm(ref.f_d(qd, None) - plant.f(q, v)) for q, v, qd in zip(log.q, log.q_dot, log.q_d))
    consts = stability_constants(gains, LearningRate.scalar(1.0, param_count(net)), plant.omega_bar, 1.1 * h,
                                 theta_bar, ref.q_bar_d, ref.q_dot_bar_d, lambda_v)
    poly = RemainderPolynomial(0.0, args.a1, 0.0, theta_bar)
    check, radii = check_gain_condition(consts, poly), set_radii(consts, poly)
    z0 = math.sqrt(log.er_norm[0] ** 2 + (2 * theta_bar) ** 2)
    env = convergence_envelope(consts, z0, log.t)
    print(f"gain condition {check.satisfied} (margin {check.margin:.4f}); sets {radii.status}, S = {radii.S_radius:.3f}")
    print(f"||z0|| = {z0:.3f}, ultimate radius = {consts.ultimate_radius:.3f}")
    print(f"max ||(e,r)|| / envelope = {np.max(log.er_norm / env):.3f}")

    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        return
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(7, 3.5))
    ax.semilogy(log.t, log.er_norm, label="||(e, r)||")
    ax.semilogy(log.t, env, "k--", label="envelope")
    ax.axhline(consts.ultimate_radius, color="grey", lw=0.8, label="ultimate radius")
    ax.set_xlabel("t [s]")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out / "envelope.svg", metadata={"Date": None})
    print(f"figure: {out / 'envelope.svg'}")


if __name__ == "__main__":
    main()
