"""Smoke test for the spde_lab extension module.

Build and install first:
    maturin build --release -m crates/python/Cargo.toml
    pip install target/wheels/spde_lab-*.whl
"""

import math

import spde_lab


def close(a, b, tol=1e-12):
    return abs(a - b) <= tol * max(1.0, abs(b))


def main():
    q = spde_lab.Spectrum("power:2", 64)
    assert q.n_modes == 64
    assert close(q.trace(), sum(1.0 / n**2 for n in range(1, 65)))

    one = spde_lab.Spectrum.from_values([1.0])
    wave = spde_lab.WaveProblem(1.0, 1.0, 1.0, one, [1.0], [0.0])
    assert wave.variance(0.0) == 0.0
    assert close(wave.covariance(0.7, 0.7), wave.variance(0.7))
    assert close(wave.energy_mean(0.0), wave.energy_initial())
    times, u, energy = wave.sample(1.0, 0.01, seed=3)
    assert len(times) == len(u) == len(energy) == 101
    assert u[0] == [1.0]

    heat = spde_lab.HeatProblem(0.5, [1.0])
    assert heat.correlation(0.1, 0.1) == 1.0
    assert close(heat.mean(0.1)[0], 0.372708, 1e-5)
    assert 0.0 < heat.correlation(0.1, 0.2) < 1.0

    lyap = spde_lab.LyapunovProblem(0.0, 0.0, 1.0, [1.0, 0.0])
    target = -math.pi**2 - 0.5
    assert close(lyap.exponent_stochastic(), target)
    slope, _ = lyap.estimate(100.0, 0.01, seed=7)
    assert abs(slope - target) < 1.0

    burgers = spde_lab.BurgersProblem(0.5, 1.0, 0.25, [0.5] + [0.0] * 15, spectrum=spde_lab.Spectrum("finite:1", 16))
    assert burgers.energy_bound_additive_gronwall(1.0) >= burgers.energy_bound_additive(1.0)
    _, e2 = burgers.energy_trace(0.1, 1e-3, seed=1)
    assert close(e2[0], burgers.e0)

    result = spde_lab.run_experiment("heat", samples=2000, seed=11)
    assert result["all_pass"], result["report_csv"]
    assert result["report_csv"].startswith("label,t,closed_form,mc_mean,mc_stderr,z,pass")
    labels = {row["label"] for row in result["rows"]}
    assert "variance" in labels

    lyap_run = spde_lab.run_experiment("lyapunov", alpha=0.0, beta=0.0, gamma=1.0, mode=1, t_final=100.0, seed=7)
    assert lyap_run["all_pass"]

    for bad in [dict(dt=-1.0), dict(frobnicate=1)]:
        try:
            spde_lab.run_experiment("heat", **bad)
        except ValueError:
            pass
        else:
            raise AssertionError(f"accepted {bad}")

    print("spde_lab smoke test passed")


if __name__ == "__main__":
    main()
