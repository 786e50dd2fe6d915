"""mf-adapters: probe capability availability or serve the adapter service."""

from __future__ import annotations

import logging

import click

from .capabilities import probe_adapters
from .config import load_adapter_config


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.pass_context
def main(ctx, config_path):
    logging.basicConfig(level=logging.INFO)
    ctx.obj = load_adapter_config(config_path)


@main.command()
@click.pass_obj
def probe(cfg):
    """Show which capabilities would be served and why others would not."""
    impls, unavailable = probe_adapters(cfg)
    for cap in sorted(impls):
        click.echo(f"available    {cap}  ({type(impls[cap]).__name__})")
    for cap, reason in sorted(unavailable.items()):
        click.echo(f"unavailable  {cap}  ({reason})")


@main.command()
@click.option("--port", default=9100, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.pass_obj
def serve(cfg, port, host):
    """Run the adapter service."""
    import uvicorn

    from .service import build_adapter_app

    uvicorn.run(build_adapter_app(cfg), host=host, port=port)


if __name__ == "__main__":
    main()
