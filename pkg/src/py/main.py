import argparse
from datetime import datetime
from pathlib import Path
from typing import Optional, Tuple

from commands import COMMANDS, run
from config import load_config
from errors import ConfigValidationError
from logger import logger


def parse_arguments() -> Tuple[str, str, Optional[str], bool]:
    parser = argparse.ArgumentParser(description="Steady slip-channel flow solver and verification suite")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("config", help="INI file with [geometry] [flow] [carrier] [mesh] ... sections")
    parser.add_argument("--output", default=None, help="Output folder (overrides [run] output_dir)")
    parser.add_argument(
        "--dev", action="store_true", help="Run in dev mode with a coarser mesh and fewer samples"
    )
    options = parser.parse_args()
    return options.command, options.config, options.output, options.dev


def main() -> int:
    command, config_path, output, dev_mode = parse_arguments()
    if dev_mode:
        logger.info("Running in dev mode - h doubled, random samples capped")
    try:
        config = load_config(config_path, dev=dev_mode)
    except ConfigValidationError as e:
        logger.error(f"Invalid configuration {config_path}: {e}")
        return e.exit_code

    start_time = datetime.now()
    status = run(command, config, Path(output) if output else None)
    logger.info(f"Total processing time: {datetime.now() - start_time}")
    return status


if __name__ == "__main__":
    raise SystemExit(main())
