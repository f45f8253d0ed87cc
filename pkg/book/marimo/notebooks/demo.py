# /// script
# requires-python = ">=3.13"
# dependencies = [
#     "marimo>=0.23.11",
#     "plotly>=6.9.0",
#     "irspla",
# ]
#
# [tool.uv.sources]
# irspla = { path = "../../..", editable=true }
#
# ///


"""Learning curves of the acquisition strategies on a small IRS scenario."""

import marimo

__generated_with = "0.23.11"
app = marimo.App()


@app.cell
def __import_libs():
    import marimo as mo
    import plotly.express as px

    from irspla.config import apply_overrides, parse_config
    from irspla.experiment import run_experiment

    return apply_overrides, mo, parse_config, px, run_experiment


@app.cell
def __controls(mo):
    runs = mo.ui.slider(1, 10, value=3, label="runs")
    iterations = mo.ui.slider(2, 20, value=8, label="iterations")
    mo.hstack([runs, iterations])
    return iterations, runs


@app.cell
def __config(apply_overrides, iterations, parse_config, runs):
    text = f"""
experiment:
  name: demo
  seed: 7
  runs: {runs.value}
  iterations: {iterations.value}
  per_class_train: 30
  per_class_test: 50
  strategies: [random, bald, salu]
acquisition:
  m1: 5
  m2: 20
model:
  kernel: fit_once
  grid_points: 4
scenario:
  n_y: 4
  n_z: 4
"""
    config = parse_config(text)
    config = apply_overrides(config, out="_demo")
    return (config,)


@app.cell
def __run(config, run_experiment):
    result = run_experiment(config, write=False)
    return (result,)


@app.cell
def __plot(px, result):
    summary = result.summary.per_iteration
    px.line(
        summary,
        x="iteration",
        y="mean_error",
        error_y="std_error",
        color="strategy",
        labels={"mean_error": "error rate"},
    )


@app.cell
def __final(result):
    result.summary.final.groupby("strategy")["error_rate"].describe()


if __name__ == "__main__":
    app.run()
