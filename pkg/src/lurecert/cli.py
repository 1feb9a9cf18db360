"""Command-line client for the certification service.

The CLI builds a request from a system document plus flags and posts it to
the service: an in-process instance by default, or a running deployment
via --server. Exit codes: 0 certified/valid, 1 not certified, 2 input or
transport error.
"""

import argparse
import asyncio
import json
import os
import sys

import httpx


def build_parser():
    p = argparse.ArgumentParser(
        prog="lurecert",
        description="certify stability and regions of attraction for positive "
                    "linear plants under feedforward-network feedback",
    )
    sub = p.add_subparsers(dest="command", required=True)
    specs = {
        "check": "validate a system document and report its admissible sector",
        "sector": "tabulate certified network sectors over output box heights",
        "certify": "sector-route certification with analytic region of attraction",
        "lyap": "quadratic certificate and sampled sublevel-set region",
        "simulate": "sample a certified region and classify trajectory fates",
        "compare": "run and time both certification routes",
    }
    for name, help_text in specs.items():
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--input", required=True, help="system document (JSON)")
        sp.add_argument("--out", default=None, help="directory for report.json and CSVs")
        sp.add_argument("--server", default=None,
                        help="base URL of a running service (default: in-process)")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--samples", type=int, default=None,
                        help="sampling count (meaning depends on the command)")
        sp.add_argument("--horizon", type=float, default=50.0)
        sp.add_argument("--step", type=float, default=1e-3)
        sp.add_argument("--y-max", type=float, default=None,
                        help="output box probe ceiling (or table ceiling for sector)")
        sp.add_argument("--tol", type=float, default=None,
                        help="tolerance (certification bisection, or Metzler slack for check)")
        if name == "simulate":
            sp.add_argument("--region", choices=["aizerman", "ellipsoid"],
                            default="aizerman")
            sp.add_argument("--region-scale", type=float, default=1.0)
        if name in ("sector", "lyap"):
            sp.add_argument("--grid", type=int, default=None)
    return p


def _payload(args, doc):
    cmd = args.command
    body = {"system": doc}

    def put(key, value):
        if value is not None:
            body[key] = value

    if cmd == "check":
        put("metzler_tol", args.tol)
    elif cmd == "sector":
        put("y_max", args.y_max)
        put("count", args.samples)
        put("grid", args.grid)
    elif cmd == "certify":
        put("tol", args.tol)
        put("y_probe_max", args.y_max)
    elif cmd == "lyap":
        body["seed"] = args.seed
        put("tol", args.tol)
        put("samples_per_level", args.samples)
        put("y_probe_max", args.y_max)
        put("grid", args.grid)
    elif cmd == "simulate":
        body.update(seed=args.seed, horizon=args.horizon, step=args.step,
                    region=args.region, region_scale=args.region_scale)
        put("tol", args.tol)
        put("samples", args.samples)
        put("y_probe_max", args.y_max)
    elif cmd == "compare":
        body["seed"] = args.seed
        put("tol", args.tol)
        put("samples_per_level", args.samples)
        put("y_probe_max", args.y_max)
    return body


def _post(server, path, payload):
    if server:
        with httpx.Client(base_url=server, timeout=600.0) as client:
            return client.post(path, json=payload)

    from .service.app import app

    async def go():
        transport = httpx.ASGITransport(app=app)
        async with httpx.AsyncClient(transport=transport,
                                     base_url="http://lurecert.local",
                                     timeout=None) as client:
            return await client.post(path, json=payload)

    return asyncio.run(go())


def _write_outputs(outdir, body):
    os.makedirs(outdir, exist_ok=True)
    report_path = os.path.join(outdir, "report.json")
    with open(report_path, "w") as f:
        json.dump(body["report"], f, indent=2, sort_keys=True)
        f.write("\n")
    written = [report_path]
    for name, text in body.get("csvs", {}).items():
        path = os.path.join(outdir, name)
        with open(path, "w") as f:
            f.write(text)
        written.append(path)
    return written


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        with open(args.input) as f:
            doc = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        print(f"error: cannot load {args.input}: {e}", file=sys.stderr)
        return 2
    try:
        resp = _post(args.server, f"/{args.command}", _payload(args, doc))
    except httpx.HTTPError as e:
        print(f"error: request failed: {e}", file=sys.stderr)
        return 2
    if resp.status_code != 200:
        try:
            detail = resp.json().get("detail", resp.text)
        except ValueError:
            detail = resp.text
        print(f"error: {detail}", file=sys.stderr)
        return 2
    body = resp.json()
    print(body["summary"])
    if args.out:
        for path in _write_outputs(args.out, body):
            print(f"wrote {path}")
    return int(body["exit_code"])


if __name__ == "__main__":
    raise SystemExit(main())
