import os
import sys
import json
import logging
from argparse import ArgumentParser
from typing import List, Optional


STAGES = ("geometry", "bounds", "certify", "verify", "all")
THREAD_VARIABLES = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")
LOG_FDIR = "logs"

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_STAGE = 2
EXIT_VERIFICATION = 3


def create_logger(logging_fdir: str, log_fname: str):
    os.makedirs(logging_fdir, exist_ok=True)
    log_fname = os.path.join(logging_fdir, log_fname)
    logger = logging.getLogger()
    logger.setLevel(logging.DEBUG)
    file_handler = logging.FileHandler(log_fname)
    file_handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(module)s: %(message)s"))
    logger.addHandler(file_handler)


def limit_threads(config_fname: Optional[str], threads: Optional[int]):
    """
    Pins BLAS/OpenMP pools before numpy is imported; the flag wins over the
    "threads" key of the configuration file
    """
    if threads is None and config_fname is not None:
        try:
            with open(config_fname, "r", encoding="utf-8") as f:
                threads = json.load(f).get("threads")
        except (OSError, ValueError, AttributeError):
            threads = None
    if isinstance(threads, int) and not isinstance(threads, bool) and threads > 0:
        for name in THREAD_VARIABLES:
            os.environ[name] = str(threads)


def main(
    stage: str,
    config_fname: Optional[str],
    out: Optional[str],
    sigmas: Optional[List[float]],
    family: Optional[str],
    seed: Optional[int],
    threads: Optional[int],
) -> int:
    limit_threads(config_fname, threads)
    from stages import run_stages
    from utils.data_loaders import RunConfig, load_config, override_config, validate_config
    from utils.exceptions import ConfigError, SpiralError

    try:
        config = load_config(config_fname) if config_fname else validate_config(RunConfig())
        config = override_config(config, out=out, sigmas=sigmas, family=family, seed=seed, threads=threads)
    except ConfigError as error:
        print(f"configuration error: {error}", file=sys.stderr)
        return EXIT_CONFIG

    create_logger(os.path.join(config.outputs.directory, LOG_FDIR), f"{stage}.log")
    logging.info(f"run {stage}: config {config.hash} ({config_fname or 'defaults'})")
    try:
        ok = run_stages(config, stage)
    except ConfigError as error:
        print(f"configuration error: {error}", file=sys.stderr)
        logging.error(str(error))
        return EXIT_CONFIG
    except SpiralError as error:
        where = getattr(error, "stage", stage)
        print(f"stage {where} failed: {error}", file=sys.stderr)
        logging.error(f"stage {where} failed: {error}")
        return EXIT_STAGE
    if not ok:
        print("verification failed: some moment exceeds its bound", file=sys.stderr)
        return EXIT_VERIFICATION
    logging.info(f"run {stage}: done, outputs in {config.outputs.directory}")
    return EXIT_OK


if __name__ == "__main__":
    parser = ArgumentParser()
    parser.add_argument("stage", choices=STAGES, type=str)
    parser.add_argument("--config", required=False, type=str)
    parser.add_argument("--out", required=False, type=str)
    parser.add_argument("--sigma", required=False, nargs="+", type=float)
    parser.add_argument("--family", required=False, type=str)
    parser.add_argument("--seed", required=False, type=int)
    parser.add_argument("--threads", required=False, type=int)
    args = parser.parse_args()
    sys.exit(
        main(
            stage=args.stage,
            config_fname=args.config,
            out=args.out,
            sigmas=args.sigma,
            family=args.family,
            seed=args.seed,
            threads=args.threads,
        )
    )
