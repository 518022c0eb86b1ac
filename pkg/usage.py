"""
Demo: one extrapolation study and one weighted run.

Run with `python usage.py`. Results are written to ./output.
"""
import logging

import spde_richardson as sr
from spde_richardson.weights import unweight, weighted_problem

logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s | %(levelname)s | %(name)s:%(lineno)d | %(message)s",
)


def extrapolation_demo():
    config = sr.StudyConfig("upwind", levels=4, n0=16, k=1)
    report = sr.run_study(config)
    report.write_csv("output/upwind")
    print(report.summary_text())


def weighted_demo():
    problem = sr.build_preset("upwind")
    grid = problem.grid(32)
    certificate = sr.choose_epsilon(
        problem.stencil, sr.WeightSpec(s_bar=2.0), kappa=0.25, h_max=grid.h, period=problem.period
    )
    print(certificate)
    w = sr.WeightSpec(2.0, certificate.epsilon)
    weighted = weighted_problem(problem, w, grid.h)
    scheme = problem.scheme_for(grid)
    path = sr.sample_path(0, problem.T, scheme.steps(problem.T), problem.R)
    trajectory = unweight(sr.integrate(weighted.stencil, weighted, grid, path, scheme), w)
    exact = problem.oracle.evaluate(problem.T, grid.points())
    print(f"sup error of the weighted run: {abs(trajectory.final.flat - exact).max():.3e}")


if __name__ == "__main__":
    extrapolation_demo()
    weighted_demo()
