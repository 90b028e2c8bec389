"""Command-line client for the correction service.

The CLI is a thin HTTP client: every command builds a request, posts it to
the service and writes the response to files.  By default the service runs
in-process (no server needed); ``--server URL`` targets a remote instance
instead.  Outputs land in ``--out-dir`` (or ``$HBTCORR_OUT_DIR``) together
with a ``run.json`` provenance record from which the run can be reproduced
bit-identically: ``hbtcorr <command> --config run.json``.

Units at this boundary: rates in photons/ns, times in ns (``us``/``ms``/``s``
suffixes accepted), detector resolution in ps.

Exit codes: 0 success, 1 validation error, 2 runtime error.
"""

from __future__ import annotations

import asyncio
import json
import sys
from pathlib import Path

import click
import httpx
from click.core import ParameterSource

from . import __version__, io
from .types import CorrelationCurve, IntervalHistogram

_TIME_UNITS = [("ns", 1.0), ("us", 1e3), ("ms", 1e6), ("ps", 1e-3), ("s", 1e9)]


class ValidationFailure(click.ClickException):
    exit_code = 1


class RuntimeFailure(click.ClickException):
    exit_code = 2


def parse_time_ns(value) -> float:
    """Parse a time as ns; plain numbers are ns, suffixes ps/ns/us/ms/s accepted."""
    if isinstance(value, (int, float)):
        return float(value)
    text = str(value).strip()
    for suffix, factor in _TIME_UNITS:
        if text.endswith(suffix):
            return float(text[: -len(suffix)]) * factor
    return float(text)


class ServiceClient:
    """Posts requests either to a remote server or an in-process app."""

    def __init__(self, server: str | None):
        self.server = server

    async def _post(self, path: str, payload: dict) -> httpx.Response:
        if self.server:
            transport = None
            base_url = self.server
        else:
            from .service import create_app

            transport = httpx.ASGITransport(
                app=create_app(), raise_app_exceptions=False
            )
            base_url = "http://hbtcorr.internal"
        async with httpx.AsyncClient(
            transport=transport, base_url=base_url, timeout=3600.0
        ) as client:
            return await client.post(path, json=payload)

    def post(self, path: str, payload: dict) -> dict:
        try:
            response = asyncio.run(self._post(path, payload))
        except httpx.HTTPError as exc:
            raise RuntimeFailure(f"service unreachable: {exc}") from exc
        if response.status_code >= 500:
            raise RuntimeFailure(_detail(response))
        if response.status_code >= 400:
            raise ValidationFailure(_detail(response))
        return response.json()


def _detail(response: httpx.Response) -> str:
    try:
        return str(response.json().get("detail", response.text))
    except ValueError:
        return response.text


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    data = json.loads(Path(path).read_text())
    if "parameters" in data and isinstance(data["parameters"], dict):
        data = data["parameters"]
    if not isinstance(data, dict):
        raise ValidationFailure(f"{path}: config must be a JSON object")
    return data


def _resolve(ctx: click.Context, config: str | None, params: dict) -> dict:
    """Explicit flags beat config-file values beat defaults; typos are fatal."""
    cfg = _load_config(config)
    unknown = set(cfg) - set(params)
    if unknown:
        raise ValidationFailure(
            f"unknown config keys: {', '.join(sorted(unknown))}"
        )
    resolved = {}
    for name, value in params.items():
        if ctx.get_parameter_source(name) == ParameterSource.COMMANDLINE:
            resolved[name] = value
        elif name in cfg:
            resolved[name] = cfg[name]
        else:
            resolved[name] = value
    return resolved


def _out_dir(ctx: click.Context) -> Path:
    path = Path(ctx.obj["out_dir"])
    path.mkdir(parents=True, exist_ok=True)
    return path


def _client(ctx: click.Context) -> ServiceClient:
    return ServiceClient(ctx.obj["server"])


def _write_run_json(out: Path, command: str, parameters: dict, outputs: list[str]) -> None:
    record = {
        "tool": "hbtcorr",
        "version": __version__,
        "command": command,
        "parameters": parameters,
        "outputs": outputs,
    }
    io.atomic_write(out / "run.json", (json.dumps(record, indent=2) + "\n").encode())


def _echo_diagnostics(payload: dict) -> None:
    for line in payload.get("diagnostics") or []:
        click.echo(f"diagnostic: {line}", err=True)


def _require_seed(p: dict) -> None:
    # stochastic commands need a seed, from the flag or the config file
    if p.get("seed") is None:
        raise ValidationFailure("--seed is required (or provide it via --config)")


def _source_payload(model: str, rate: float, tau_c: float | None, fraction: float | None) -> dict:
    payload = {"kind": model, "rate": rate}
    if tau_c is not None:
        payload["tau_c"] = tau_c
    if fraction is not None:
        payload["fraction"] = fraction
    return payload


def _detector_payload(p: dict) -> dict:
    payload = {
        "efficiency": p["efficiency"],
        "dead_time_ns": parse_time_ns(p["dead_time"]),
        "dark_rate_hz": p["dark_rate"],
        "resolution_ps": p["resolution"],
        "afterpulse_prob": p["afterpulse_prob"],
        "window_ns": p["window"],
    }
    if p["afterpulse_tau"] is not None:
        payload["afterpulse_tau_ns"] = p["afterpulse_tau"]
    return payload


_model_options = [
    click.option("--model", type=click.Choice(["chaotic", "coherent", "mixed"]),
                 default="chaotic", show_default=True, help="Source kind."),
    click.option("--rate", type=float, default=0.04, show_default=True,
                 help="Mean photon rate, photons/ns."),
    click.option("--tau-c", type=float, default=None,
                 help="Coherence time, ns (required unless coherent)."),
    click.option("--fraction", type=float, default=None,
                 help="Chaotic fraction m in [0,1]; bunching b = m**2."),
]

_detector_options = [
    click.option("--efficiency", type=float, default=1.0, show_default=True),
    click.option("--dead-time", default="0", show_default=True,
                 help="Detector dead time, ns (time suffixes accepted)."),
    click.option("--dark-rate", type=float, default=0.0, show_default=True,
                 help="Dark count rate, counts/s."),
    click.option("--resolution", type=int, default=1, show_default=True,
                 help="Timestamp resolution, ps."),
    click.option("--afterpulse-prob", type=float, default=0.0, show_default=True),
    click.option("--afterpulse-tau", type=float, default=None,
                 help="Afterpulse delay constant, ns."),
]


def _add(options):
    def wrap(fn):
        for option in reversed(options):
            fn = option(fn)
        return fn

    return wrap


@click.group()
@click.version_option(__version__)
@click.option("--server", envvar="HBTCORR_SERVER", default=None,
              help="Service URL; omit to run the service in-process.")
@click.option("--out-dir", envvar="HBTCORR_OUT_DIR", default=".",
              type=click.Path(file_okay=False),
              help="Directory for output files.")
@click.pass_context
def cli(ctx, server, out_dir):
    """Photon-correlation toolkit: simulate, correct, fit, analyse."""
    ctx.obj = {"server": server, "out_dir": out_dir}


@cli.command()
@_add(_model_options)
@click.option("--bin", "bin_", type=float, default=0.1, show_default=True,
              help="Delay bin width, ns.")
@click.option("--window", type=float, default=100.0, show_default=True,
              help="Delay window, ns.")
@click.option("--config", type=click.Path(exists=True, dir_okay=False), default=None)
@click.pass_context
def theory(ctx, model, rate, tau_c, fraction, bin_, window, config):
    """Write the analytic g2 curve for a source model."""
    p = _resolve(ctx, config, {
        "model": model, "rate": rate, "tau_c": tau_c, "fraction": fraction,
        "bin_": bin_, "window": window,
    })
    payload = {
        "source": _source_payload(p["model"], p["rate"], p["tau_c"], p["fraction"]),
        "bin_ns": p["bin_"],
        "window_ns": p["window"],
    }
    data = _client(ctx).post("/theory", payload)
    out = _out_dir(ctx)
    curve = CorrelationCurve(data["curve"]["bin_ns"], data["curve"]["values"])
    io.write_series_csv(out / "g2_curve.csv", curve)
    _write_run_json(out, "theory", p, ["g2_curve.csv"])
    click.echo(f"wrote {out / 'g2_curve.csv'}")


@cli.command()
@_add(_model_options)
@_add(_detector_options)
@click.option("--duration", default="1ms", show_default=True,
              help="Simulated time (ns; suffixes accepted).")
@click.option("--bin", "bin_", type=float, default=0.1, show_default=True)
@click.option("--window", type=float, default=100.0, show_default=True)
@click.option("--seed", type=int, default=None, help="Master RNG seed (required).")
@click.option("--save-streams", is_flag=True, default=False,
              help="Also write the detected photon streams as .ttag files.")
@click.option("--config", type=click.Path(exists=True, dir_okay=False), default=None)
@click.pass_context
def simulate(ctx, model, rate, tau_c, fraction, efficiency, dead_time, dark_rate,
             resolution, afterpulse_prob, afterpulse_tau, duration, bin_, window,
             seed, save_streams, config):
    """Run the HBT Monte Carlo and write the interval histogram."""
    p = _resolve(ctx, config, {
        "model": model, "rate": rate, "tau_c": tau_c, "fraction": fraction,
        "efficiency": efficiency, "dead_time": dead_time, "dark_rate": dark_rate,
        "resolution": resolution, "afterpulse_prob": afterpulse_prob,
        "afterpulse_tau": afterpulse_tau, "duration": duration, "bin_": bin_,
        "window": window, "seed": seed, "save_streams": save_streams,
    })
    _require_seed(p)
    payload = {
        "source": _source_payload(p["model"], p["rate"], p["tau_c"], p["fraction"]),
        "detector": _detector_payload(p),
        "duration_ns": parse_time_ns(p["duration"]),
        "bin_ns": p["bin_"],
        "seed": p["seed"],
        "include_streams": bool(p["save_streams"]),
    }
    data = _client(ctx).post("/simulate", payload)
    _echo_diagnostics(data)
    out = _out_dir(ctx)
    hist = IntervalHistogram(
        bin_width=data["histogram"]["bin_ns"],
        counts=data["histogram"]["counts"],
        start_count=data["histogram"]["start_count"],
        window=data["histogram"]["window_ns"],
    )
    io.write_histogram_csv(out / "histogram.csv", hist, seed=p["seed"], parameters=p)
    outputs = ["histogram.csv", "histogram.json"]
    if p["save_streams"] and data.get("streams"):
        from .types import PhotonStream

        for name, s in zip(("arm1.ttag", "arm2.ttag"), data["streams"]):
            io.write_photons_ttag(
                out / name, PhotonStream(s["timestamps_ps"], s["duration_ps"])
            )
            outputs.append(name)
    _write_run_json(out, "simulate", p, outputs)
    click.echo(f"wrote {out / 'histogram.csv'} ({hist.start_count} starts)")


@cli.command()
@click.option("--histogram", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Interval histogram CSV (sidecar JSON supplies metadata).")
@click.option("--starts", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Start-arm photon stream (.ttag binary or text, ps).")
@click.option("--stops", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Stop-arm photon stream (.ttag binary or text, ps).")
@click.option("--duration", default=None,
              help="Stream duration (required with --starts/--stops).")
@click.option("--start-count", type=int, default=None,
              help="Override start count for histograms without a sidecar.")
@click.option("--bin", "bin_", type=float, default=0.1, show_default=True)
@click.option("--window", type=float, default=100.0, show_default=True)
@click.option("--order", type=int, default=9, show_default=True)
@click.option("--mean-rate-mode", type=click.Choice(["given", "from_counts", "tail_normalized"]),
              default="from_counts", show_default=True)
@click.option("--mean-rate", type=float, default=None,
              help="Mean photon rate, photons/ns (mode 'given').")
@click.option("--total-counts", type=int, default=None,
              help="Total detected counts (mode 'from_counts' with --histogram).")
@click.option("--config", type=click.Path(exists=True, dir_okay=False), default=None)
@click.pass_context
def correct(ctx, histogram, starts, stops, duration, start_count, bin_, window,
            order, mean_rate_mode, mean_rate, total_counts, config):
    """Apply the order-N correction to a measured interval histogram."""
    p = _resolve(ctx, config, {
        "histogram": histogram, "starts": starts, "stops": stops,
        "duration": duration, "start_count": start_count, "bin_": bin_,
        "window": window, "order": order, "mean_rate_mode": mean_rate_mode,
        "mean_rate": mean_rate, "total_counts": total_counts,
    })
    payload = {"order": p["order"], "mean_rate_mode": p["mean_rate_mode"]}
    if p["histogram"] is not None and (p["starts"] is not None or p["stops"] is not None):
        raise ValidationFailure("--histogram and --starts/--stops are mutually exclusive")
    if p["histogram"] is not None:
        hist = io.read_histogram_csv(p["histogram"], start_count=p["start_count"])
        if p["mean_rate_mode"] == "from_counts":
            if p["total_counts"] is None or p["duration"] is None:
                raise ValidationFailure(
                    "--total-counts and --duration are required for "
                    "from_counts with --histogram"
                )
            payload["total_counts"] = p["total_counts"]
            payload["duration_ns"] = parse_time_ns(p["duration"])
    elif p["starts"] is not None and p["stops"] is not None:
        if p["duration"] is None:
            raise ValidationFailure("--duration is required with --starts/--stops")
        duration_ps = int(round(parse_time_ns(p["duration"]) * 1000))
        s1 = io.read_photons(p["starts"], duration_ps)
        s2 = io.read_photons(p["stops"], duration_ps)
        from .simulator import start_stop_histogram

        hist = start_stop_histogram(s1, s2, p["bin_"], p["window"])
        if p["mean_rate_mode"] == "from_counts":
            payload["total_counts"] = len(s1) + len(s2)
            payload["duration_ns"] = parse_time_ns(p["duration"])
    else:
        raise ValidationFailure("provide --histogram or both --starts and --stops")
    if p["mean_rate_mode"] == "given":
        if p["mean_rate"] is None:
            raise ValidationFailure("--mean-rate is required for mode 'given'")
        payload["mean_rate_per_ns"] = p["mean_rate"]
    payload["histogram"] = {
        "bin_ns": hist.bin_width,
        "window_ns": hist.window,
        "start_count": hist.start_count,
        "counts": hist.counts.tolist(),
    }
    data = _client(ctx).post("/correct", payload)
    _echo_diagnostics(data)
    out = _out_dir(ctx)
    curve = CorrelationCurve(data["curve"]["bin_ns"], data["curve"]["values"])
    io.write_series_csv(out / "g2_corrected.csv", curve)
    _write_run_json(out, "correct", p, ["g2_corrected.csv"])
    click.echo(f"wrote {out / 'g2_corrected.csv'}")


@cli.command()
@click.option("--curve", type=click.Path(exists=True, dir_okay=False), required=True,
              help="g2 curve CSV to fit.")
@click.option("--b0", type=float, default=None, help="Initial bunching amplitude.")
@click.option("--tau-c0", type=float, default=None, help="Initial coherence time, ns.")
@click.option("--bin-centers", is_flag=True, default=False,
              help="Evaluate the model at bin centres (histogram-derived curves).")
@click.option("--config", type=click.Path(exists=True, dir_okay=False), default=None)
@click.pass_context
def fit(ctx, curve, b0, tau_c0, bin_centers, config):
    """Fit 1 + b*exp(-2 tau/tau_c) to a correlation curve."""
    p = _resolve(ctx, config, {
        "curve": curve, "b0": b0, "tau_c0": tau_c0, "bin_centers": bin_centers,
    })
    loaded = io.read_curve_csv(p["curve"])
    payload = {
        "curve": {"bin_ns": loaded.bin_width, "values": loaded.values.tolist()},
        "bin_centers": bool(p["bin_centers"]),
    }
    if p["b0"] is not None and p["tau_c0"] is not None:
        payload["initial_b"] = p["b0"]
        payload["initial_tau_c_ns"] = p["tau_c0"]
    data = _client(ctx).post("/fit", payload)
    out = _out_dir(ctx)
    io.atomic_write(out / "fit.json", (json.dumps(data, indent=2) + "\n").encode())
    _write_run_json(out, "fit", p, ["fit.json"])
    click.echo(
        f"b={data['b']:.4g} tau_c={data['tau_c_ns']:.4g} ns "
        f"(converged={data['converged']})"
    )


@cli.command("error-surface")
@click.option("--axis", type=click.Choice(["intensity", "coherence_time"]),
              required=True)
@click.option("--from", "from_", type=float, required=True, help="Sweep start.")
@click.option("--to", type=float, required=True, help="Sweep end.")
@click.option("--steps", type=int, default=5, show_default=True)
@click.option("--rate", type=float, default=0.04, show_default=True,
              help="Fixed mean rate (swept if axis=intensity).")
@click.option("--tau-c", type=float, default=0.5, show_default=True,
              help="Fixed coherence time (swept if axis=coherence_time).")
@click.option("--fraction", type=float, default=None)
@click.option("--order", type=int, default=9, show_default=True)
@click.option("--bin", "bin_", type=float, default=0.1, show_default=True)
@click.option("--window", type=float, default=100.0, show_default=True)
@click.option("--config", type=click.Path(exists=True, dir_okay=False), default=None)
@click.pass_context
def error_surface(ctx, axis, from_, to, steps, rate, tau_c, fraction, order, bin_,
                  window, config):
    """Relative error of the order-N correction across a parameter sweep."""
    p = _resolve(ctx, config, {
        "axis": axis, "from_": from_, "to": to, "steps": steps, "rate": rate,
        "tau_c": tau_c, "fraction": fraction, "order": order, "bin_": bin_,
        "window": window,
    })
    payload = {
        "axis": p["axis"],
        "start": p["from_"],
        "stop": p["to"],
        "steps": p["steps"],
        "source": _source_payload("chaotic" if p["fraction"] is None else "mixed",
                                  p["rate"], p["tau_c"], p["fraction"]),
        "order": p["order"],
        "bin_ns": p["bin_"],
        "window_ns": p["window"],
    }
    data = _client(ctx).post("/error-surface", payload)
    out = _out_dir(ctx)
    from .analysis import ErrorSurface, SweepAxis

    surface = ErrorSurface(
        SweepAxis(data["axis"]), data["axis_values"], data["delays_ns"],
        data["delta_percent"],
    )
    io.write_surface_csv(out / "error_surface.csv", surface, parameters=p)
    _write_run_json(out, "error-surface", p,
                    ["error_surface.csv", "error_surface.json"])
    click.echo(f"wrote {out / 'error_surface.csv'}")


@cli.command()
@_add(_model_options)
@_add(_detector_options)
@click.option("--duration", default="10ms", show_default=True)
@click.option("--bin", "bin_", type=float, default=0.1, show_default=True)
@click.option("--window", type=float, default=100.0, show_default=True)
@click.option("--order", type=int, default=9, show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--mean-rate-mode", type=click.Choice(["from_counts", "tail_normalized"]),
              default="from_counts", show_default=True)
@click.option("--config", type=click.Path(exists=True, dir_okay=False), default=None)
@click.pass_context
def pipeline(ctx, model, rate, tau_c, fraction, efficiency, dead_time, dark_rate,
             resolution, afterpulse_prob, afterpulse_tau, duration, bin_, window,
             order, seed, mean_rate_mode, config):
    """Simulate, correct and fit in one run."""
    p = _resolve(ctx, config, {
        "model": model, "rate": rate, "tau_c": tau_c, "fraction": fraction,
        "efficiency": efficiency, "dead_time": dead_time, "dark_rate": dark_rate,
        "resolution": resolution, "afterpulse_prob": afterpulse_prob,
        "afterpulse_tau": afterpulse_tau, "duration": duration, "bin_": bin_,
        "window": window, "order": order, "seed": seed,
        "mean_rate_mode": mean_rate_mode,
    })
    _require_seed(p)
    payload = {
        "source": _source_payload(p["model"], p["rate"], p["tau_c"], p["fraction"]),
        "detector": _detector_payload(p),
        "duration_ns": parse_time_ns(p["duration"]),
        "bin_ns": p["bin_"],
        "order": p["order"],
        "seed": p["seed"],
        "mean_rate_mode": p["mean_rate_mode"],
    }
    data = _client(ctx).post("/pipeline", payload)
    _echo_diagnostics(data)
    out = _out_dir(ctx)
    hist = IntervalHistogram(
        bin_width=data["histogram"]["bin_ns"],
        counts=data["histogram"]["counts"],
        start_count=data["histogram"]["start_count"],
        window=data["histogram"]["window_ns"],
    )
    io.write_histogram_csv(out / "histogram.csv", hist, seed=p["seed"], parameters=p)
    curve = CorrelationCurve(data["curve"]["bin_ns"], data["curve"]["values"])
    io.write_series_csv(out / "g2_corrected.csv", curve)
    outputs = ["histogram.csv", "histogram.json", "g2_corrected.csv"]
    if data["fit"] is not None:
        io.atomic_write(
            out / "fit.json", (json.dumps(data["fit"], indent=2) + "\n").encode()
        )
        outputs.append("fit.json")
        click.echo(
            f"fit: b={data['fit']['b']:.4g} tau_c={data['fit']['tau_c_ns']:.4g} ns"
        )
    else:
        click.echo("fit: no bunching detected", err=True)
    _write_run_json(out, "pipeline", p, outputs)
    click.echo(f"wrote {len(outputs)} files to {out}")


@cli.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def serve(host, port):
    """Run the correction service with uvicorn."""
    import uvicorn

    uvicorn.run("hbtcorr.service:app", host=host, port=port)


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Exit as exc:  # --help, --version
        return int(exc.exit_code)
    except click.UsageError as exc:  # unknown command / bad flags: validation
        exc.show()
        return 1
    except click.ClickException as exc:
        exc.show()
        return int(exc.exit_code)
    except click.Abort:
        click.echo("aborted", err=True)
        return 1
    except Exception as exc:  # noqa: BLE001 - boundary: report and signal runtime failure
        click.echo(f"error: {exc}", err=True)
        return 2


if __name__ == "__main__":
    sys.exit(main())
