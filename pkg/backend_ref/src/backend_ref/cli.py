"""Command line: pick mode and transport, then serve until EOF/kill.

    backend-ref --mode stub --manifest corpus.jsonl            # stdio
    backend-ref --mode stub --manifest corpus.jsonl --tcp :9155
"""

from __future__ import annotations

import argparse
import sys

from backend_ref import server, stub


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="backend-ref")
    parser.add_argument("--mode", choices=["stub", "real"], default="stub")
    parser.add_argument("--manifest",
                        help="JSONL manifest supplying stub transcripts")
    parser.add_argument("--tcp", metavar="HOST:PORT",
                        help="serve over TCP instead of stdio (':PORT' binds "
                             "all interfaces)")
    parser.add_argument("--asr-model", default="large-v3",
                        help="real mode: ASR model identifier")
    parser.add_argument("--device", default="cpu",
                        help="real mode: torch device")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.mode == "stub":
        transcripts: dict[tuple[str, int], str] = {}
        if args.manifest:
            try:
                transcripts = stub.load_transcripts(args.manifest)
            except (OSError, ValueError) as exc:
                print(f"cannot load manifest: {exc}", file=sys.stderr)
                return 2
        handler = server.make_stub_handler(transcripts)
    else:
        from backend_ref.real import RealBackend, RealModeUnavailable

        try:
            handler = RealBackend(args.asr_model, args.device).handle
        except RealModeUnavailable as exc:
            print(str(exc), file=sys.stderr)
            return 2
    try:
        if args.tcp:
            server.serve_tcp(args.tcp, handler)
        else:
            server.serve_stdio(handler)
    except ValueError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        pass
    return 0


if __name__ == "__main__":
    sys.exit(main())
