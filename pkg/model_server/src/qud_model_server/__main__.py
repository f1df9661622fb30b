"""Run the model server: checkpoints come from QUD_*_MODEL env vars or
the corresponding flags."""

from __future__ import annotations

import argparse

import uvicorn

from qud_model_server.app import create_app
from qud_model_server.bundle import ModelBundle


def main() -> None:
    parser = argparse.ArgumentParser(prog="qud-model-server",
                                     description=__doc__)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8738)
    parser.add_argument("--anchor-model", default=None)
    parser.add_argument("--generator-model", default=None)
    parser.add_argument("--reranker-model", default=None)
    parser.add_argument("--ner-model", default=None)
    parser.add_argument("--device", default=None)
    parser.add_argument("--seed", type=int, default=None)
    args = parser.parse_args()

    bundle = ModelBundle.from_env()
    for name in ("anchor_model", "generator_model", "reranker_model",
                 "ner_model", "device", "seed"):
        value = getattr(args, name)
        if value is not None:
            setattr(bundle, name, value)
    uvicorn.run(create_app(bundle=bundle), host=args.host, port=args.port,
                log_level="info")


if __name__ == "__main__":
    main()
