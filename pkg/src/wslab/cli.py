"""Command-line client for the wslab service.

`wslab run` and `wslab validate` post configs to the HTTP service. With no
--server they spin the app up in-process over an ASGI transport, so no network
or daemon is involved and runs stay deterministic; with --server URL they talk
to a remote instance. `wslab serve` hosts the service with uvicorn.

Exit codes: 0 success, 1 invariant violations (or transport/server failure),
2 config errors. Set WSLAB_LOG=debug|info|warning|error for verbosity.
"""

from __future__ import annotations

import asyncio
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any

import click
import httpx

from .experiments import summary_to_canonical_json

log = logging.getLogger("wslab")


def _setup_logging() -> None:
    level = os.environ.get("WSLAB_LOG", "warning").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )


async def _asgi_post(path: str, payload: dict[str, Any]) -> httpx.Response:
    from .service import create_app

    transport = httpx.ASGITransport(app=create_app())
    async with httpx.AsyncClient(
        transport=transport, base_url="http://wslab.internal", timeout=None
    ) as client:
        return await client.post(path, json=payload)


def _post(server: str | None, path: str, payload: dict[str, Any]) -> httpx.Response:
    if server:
        log.info("posting %s to %s", path, server)
        return httpx.post(server.rstrip("/") + path, json=payload, timeout=None)
    log.info("posting %s in-process", path)
    return asyncio.run(_asgi_post(path, payload))


def _fail(resp: httpx.Response) -> None:
    try:
        detail = resp.json().get("detail", resp.text)
    except json.JSONDecodeError:
        detail = resp.text
    code = 2 if resp.status_code == 400 else 1
    click.echo(f"error: {detail}", err=True)
    sys.exit(code)


@click.group()
def main() -> None:
    """Numerical laboratory for transport-Sobolev experiments."""
    _setup_logging()


@main.command()
@click.argument("config", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(file_okay=False), default=".", show_default=True)
@click.option("--jobs", type=click.IntRange(min=1), default=1, show_default=True)
@click.option("--server", default=None, help="URL of a running wslab service.")
def run(config: str, out: str, jobs: int, server: str | None) -> None:
    """Run the experiment suite described by CONFIG and write reports."""
    text = Path(config).read_text(encoding="utf-8")
    resp = _post(server, "/experiments/run", {"config_toml": text, "jobs": jobs})
    if resp.status_code != 200:
        _fail(resp)
    body = resp.json()
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "summary.json").write_text(
        summary_to_canonical_json(body["summary"]), encoding="utf-8"
    )
    for name, content in sorted(body["files"].items()):
        (out_dir / name).write_text(content, encoding="utf-8")
    violations = int(body["violations"])
    click.echo(
        f"{body['summary']['kind']}: violations={violations} -> {out_dir / 'summary.json'}"
    )
    sys.exit(0 if violations == 0 else 1)


@main.command()
@click.argument("config", type=click.Path(exists=True, dir_okay=False))
@click.option("--server", default=None, help="URL of a running wslab service.")
def validate(config: str, server: str | None) -> None:
    """Validate CONFIG without running anything."""
    text = Path(config).read_text(encoding="utf-8")
    resp = _post(server, "/experiments/validate", {"config_toml": text})
    if resp.status_code != 200:
        _fail(resp)
    body = resp.json()
    click.echo(f"ok: kind={body['kind']} seed={body['seed']}")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def serve(host: str, port: int) -> None:
    """Host the wslab HTTP service."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=host, port=port)


if __name__ == "__main__":
    main()
