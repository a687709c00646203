"""Run a built-in scenario (fracture, channel) or a JSON config and summarize the time series."""
import argparse
import logging

from fpsi.scenarios import BUILTIN, ScenarioConfig, run_scenario

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("name", help="fracture, channel, or a path to a JSON config")
    ap.add_argument("--steps", type=int, default=None)
    ap.add_argument("--output-dir", default=None)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO)
    if args.name in BUILTIN:
        cfg = ScenarioConfig.from_dict(BUILTIN[args.name](), base_dir=args.output_dir or ".")
    else:
        cfg = ScenarioConfig.from_json(args.name)
    if args.steps is not None:
        cfg.max_steps = args.steps
    res = run_scenario(cfg, output_dir=args.output_dir or f"output_{cfg.name}")
    for t, e in zip(res.times, res.energy):
        print(f"t = {t:10.4g}   energy = {e:.6e}")
    print(f"max relative interface residual: {max(res.interface_residual):.2e}")
