"""Command line client for the sampler and the gap estimator.

Every subcommand except ``serve`` builds a request, sends it to the
HTTP service, and prints the JSON response.  By default the service
runs in-process, so no server needs to be started; ``--server URL``
targets a running one instead.  Exit codes: 0 on success, 1 when
validation fails (bad inputs, failed self-checks), 2 on runtime errors.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import sys

import httpx


def _int_list(text):
    try:
        values = [int(part) for part in str(text).split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError("expected a comma-separated integer list")
    if not values:
        raise argparse.ArgumentTypeError("expected at least one integer")
    return values


def _add_client_options(sub):
    sub.add_argument(
        "--server",
        default=None,
        metavar="URL",
        help="send the request to a running service instead of in-process",
    )
    sub.add_argument(
        "--config",
        default=None,
        metavar="FILE",
        help="JSON or key=value file whose entries act as flag defaults",
    )
    sub.add_argument(
        "--output",
        default=None,
        metavar="FILE",
        help="write the JSON response here instead of standard output",
    )


def _add_data_options(sub):
    sub.add_argument(
        "--data",
        default=None,
        metavar="PATH",
        help="credit data file (UCI german.data layout); defaults to the "
        "PGGAP_GERMAN_DATA environment variable, then a synthetic sample",
    )
    sub.add_argument(
        "--standardize",
        action="store_true",
        help="center and scale the numeric covariate columns",
    )
    sub.add_argument("--prior-mean", type=float, default=0.0)
    sub.add_argument(
        "--prior-variance",
        type=float,
        default=10.0,
        help="prior is normal with mean*1 and variance*I",
    )


def _add_tuning_options(sub):
    sub.add_argument("--tuning-iterations", type=int, default=25_000)
    sub.add_argument("--tuning-burn-in", type=int, default=5_000)
    sub.add_argument("--tuning-seed", type=int, default=0)
    sub.add_argument("--tuning-init", choices=("mle", "zero"), default="mle")
    sub.add_argument(
        "--nu",
        type=float,
        default=5.0,
        help="degrees of freedom of the auxiliary t density",
    )


def _add_estimator_options(sub, default_n):
    sub.add_argument("--n-samples", type=int, default=default_n)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--workers", type=int, default=1)
    sub.add_argument("--batch-size", type=int, default=256)
    sub.add_argument("--confidence-level", type=float, default=0.95)
    sub.add_argument(
        "--progress-every",
        type=int,
        default=None,
        metavar="N",
        help="report progress to standard error every N draws",
    )


def build_parser():
    parser = argparse.ArgumentParser(
        prog="pggap",
        description="Polya-Gamma Gibbs sampling for Bayesian logistic "
        "regression, with Monte Carlo lower bounds on the spectral gap.",
    )
    commands = parser.add_subparsers(dest="command", required=True)
    parsers = {}

    sub = commands.add_parser(
        "run-chain", help="run the Gibbs sampler and print a posterior summary"
    )
    _add_data_options(sub)
    sub.add_argument("--iterations", type=int, default=25_000)
    sub.add_argument("--burn-in", type=int, default=5_000)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument(
        "--init",
        choices=("mle", "zero"),
        default="mle",
        help="chain start: logistic MLE (zero vector if the MLE fails) or zero",
    )
    sub.add_argument(
        "--draws-csv",
        default=None,
        metavar="PATH",
        help="also write the kept draws as CSV with columns beta_1..beta_p",
    )
    sub.add_argument("--progress-every", type=int, default=None, metavar="N")
    _add_client_options(sub)
    sub.set_defaults(func=_cmd_run_chain)
    parsers["run-chain"] = sub

    sub = commands.add_parser(
        "estimate-gap",
        help="tune the auxiliary density, estimate s_l, and bound the gap",
    )
    _add_data_options(sub)
    _add_tuning_options(sub)
    sub.add_argument("--l", type=int, default=5, help="power of the chain kernel")
    _add_estimator_options(sub, default_n=100_000)
    _add_client_options(sub)
    sub.set_defaults(func=_cmd_estimate_gap)
    parsers["estimate-gap"] = sub

    sub = commands.add_parser(
        "sweep-l", help="pilot estimates of u_l across several powers l"
    )
    _add_data_options(sub)
    _add_tuning_options(sub)
    sub.add_argument(
        "--l-values",
        type=_int_list,
        default=[1, 2, 3, 4, 5, 6, 7, 8],
        metavar="L1,L2,...",
    )
    _add_estimator_options(sub, default_n=2_000)
    _add_client_options(sub)
    sub.set_defaults(func=_cmd_sweep_l)
    parsers["sweep-l"] = sub

    sub = commands.add_parser(
        "bd-demo",
        help="exact spectrum and trace diagnostics for the birth-death chain",
    )
    sub.add_argument("--m", type=int, default=200, help="truncation level")
    sub.add_argument(
        "--l-values",
        type=_int_list,
        default=[1, 2, 3, 4, 5, 6, 7, 8],
        metavar="L1,L2,...",
    )
    sub.add_argument(
        "--mc-samples",
        type=int,
        default=20_000,
        help="Monte Carlo cross-check sample size per power (0 skips it)",
    )
    sub.add_argument("--seed", type=int, default=0)
    _add_client_options(sub)
    sub.set_defaults(func=_cmd_bd_demo)
    parsers["bd-demo"] = sub

    sub = commands.add_parser(
        "validate", help="run the quadrature and oracle self-checks"
    )
    _add_client_options(sub)
    sub.set_defaults(func=_cmd_validate)
    parsers["validate"] = sub

    sub = commands.add_parser("serve", help="start the HTTP service")
    sub.add_argument("--host", default="127.0.0.1")
    sub.add_argument("--port", type=int, default=8000)
    sub.set_defaults(func=_cmd_serve)
    parsers["serve"] = sub

    return parser, parsers


def _read_config(path):
    with open(path) as handle:
        text = handle.read()
    try:
        loaded = json.loads(text)
        if not isinstance(loaded, dict):
            raise ValueError("config file must hold a JSON object")
        return loaded
    except json.JSONDecodeError:
        pass
    entries = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError("config line %d is not key=value: %r" % (lineno, raw))
        key, _, value = line.partition("=")
        value = value.strip()
        try:
            entries[key.strip()] = json.loads(value)
        except json.JSONDecodeError:
            entries[key.strip()] = value
    return entries


def _apply_config(parser, parsers, argv, args):
    """Reparse with config-file entries installed as subcommand defaults.

    Flags given on the command line keep priority because the reparse
    still sees them; config entries only fill in what was left unset.
    Keys use the flag spelling with underscores (prior_variance,
    l_values, draws_csv).
    """
    entries = _read_config(args.config)
    sub = parsers[args.command]
    valid = {action.dest for action in sub._actions}
    unknown = sorted(set(entries) - valid)
    if unknown:
        raise ValueError(
            "config keys not recognized by %s: %s" % (args.command, ", ".join(unknown))
        )
    if "l_values" in entries and isinstance(entries["l_values"], str):
        entries["l_values"] = _int_list(entries["l_values"])
    sub.set_defaults(**entries)
    return parser.parse_args(argv)


def _request(args, path, payload):
    """POST to a remote server or to the in-process application."""
    if args.server is not None:
        with httpx.Client(base_url=args.server, timeout=None) as client:
            return client.post(path, json=payload)

    from .service import create_app

    async def call():
        transport = httpx.ASGITransport(app=create_app())
        async with httpx.AsyncClient(
            transport=transport, base_url="http://pggap.local", timeout=None
        ) as client:
            return await client.post(path, json=payload)

    return asyncio.run(call())


def _emit(args, body):
    text = json.dumps(body, indent=2)
    if args.output is None or args.output == "-":
        print(text)
    else:
        with open(args.output, "w") as handle:
            handle.write(text + "\n")


def _finish(args, resp):
    """Print the response and convert the HTTP status to an exit code."""
    try:
        body = resp.json()
    except json.JSONDecodeError:
        print("malformed response: %s" % resp.text[:500], file=sys.stderr)
        return 2
    if resp.status_code >= 500:
        print("error: %s" % body.get("detail", body), file=sys.stderr)
        return 2
    if resp.status_code >= 400:
        print("invalid request: %s" % body.get("detail", body), file=sys.stderr)
        return 1
    _emit(args, body)
    return 0


def _data_payload(args):
    return {
        "data": {"path": args.data, "standardize": args.standardize},
        "prior": {"mean": args.prior_mean, "variance": args.prior_variance},
    }


def _tuning_payload(args):
    return {
        "tuning_iterations": args.tuning_iterations,
        "tuning_burn_in": args.tuning_burn_in,
        "tuning_seed": args.tuning_seed,
        "tuning_init": args.tuning_init,
        "nu": args.nu,
    }


def _estimator_payload(args):
    return {
        "n_samples": args.n_samples,
        "seed": args.seed,
        "workers": args.workers,
        "batch_size": args.batch_size,
        "confidence_level": args.confidence_level,
        "progress_every": args.progress_every,
    }


def _cmd_run_chain(args):
    payload = _data_payload(args)
    payload.update(
        iterations=args.iterations,
        burn_in=args.burn_in,
        seed=args.seed,
        init=args.init,
        draws_path=args.draws_csv,
        progress_every=args.progress_every,
    )
    return _finish(args, _request(args, "/chain/run", payload))


def _cmd_estimate_gap(args):
    payload = _data_payload(args)
    payload.update(_tuning_payload(args))
    payload.update(_estimator_payload(args))
    payload["l"] = args.l
    return _finish(args, _request(args, "/gap/estimate", payload))


def _cmd_sweep_l(args):
    payload = _data_payload(args)
    payload.update(_tuning_payload(args))
    payload.update(_estimator_payload(args))
    payload["l_values"] = args.l_values
    return _finish(args, _request(args, "/gap/sweep", payload))


def _cmd_bd_demo(args):
    payload = {
        "m": args.m,
        "l_values": args.l_values,
        "mc_samples": args.mc_samples,
        "seed": args.seed,
    }
    return _finish(args, _request(args, "/birth-death/demo", payload))


def _cmd_validate(args):
    resp = _request(args, "/validate", {})
    code = _finish(args, resp)
    if code != 0:
        return code
    body = resp.json()
    for check in body["checks"]:
        print(
            "%s %s -- %s"
            % ("ok  " if check["passed"] else "FAIL", check["name"], check["detail"]),
            file=sys.stderr,
        )
    return 0 if body["passed"] else 1


def _cmd_serve(args):
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port)
    return 0


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, parsers = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        try:
            args = _apply_config(parser, parsers, argv, args)
        except (OSError, ValueError) as exc:
            print("config error: %s" % exc, file=sys.stderr)
            return 1
    try:
        return args.func(args)
    except httpx.HTTPError as exc:
        print("request failed: %s" % exc, file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
