"""Boundary-driven spin chain MCP Server.

This server exposes the experiment runner and the two-site closed forms as MCP tools.
"""

import asyncio
import json
import logging
import os
import sys
from typing import Any, Optional

from mcp.server import Server
from mcp.server.stdio import stdio_server
from mcp.types import TextContent, Tool

from .models import ExperimentConfig, ThermoRecord, TwoSiteParams
from .runner import ExperimentRunner
from .thermo import classify_regime
from .twosite_oracle import ness_closed_form

logger = logging.getLogger(__name__)

# Initialize MCP server
app = Server("qthermo-mcp.boundary-driven")

# Global runner
runner: Optional[ExperimentRunner] = None

TWO_SITE_SCHEMA = {
    "type": "object",
    "properties": {
        "J": {"type": "number", "description": "Exchange coupling J_x = J_y", "default": 1.0},
        "h_L": {"type": "number", "description": "Field on site 1 and the left copies", "default": 1.0},
        "h_R": {"type": "number", "description": "Field on site 2 and the right copies", "default": 1.0},
        "lambda": {"type": "number", "description": "Coupling rate of both baths", "exclusiveMinimum": 0, "default": 1.0},
        "beta_L": {"type": "number", "description": "Left inverse temperature", "minimum": 0, "default": 1.0},
        "beta_R": {"type": "number", "description": "Right inverse temperature", "minimum": 0, "default": 1.0},
    },
    "required": [],
}


def _text(payload: Any) -> list[TextContent]:
    return [TextContent(type="text", text=json.dumps(payload, indent=2, default=str))]


@app.list_tools()
async def list_tools() -> list[Tool]:
    """List available MCP tools.

    Returns:
        List of available tools
    """
    return [
        Tool(
            name="list_experiments",
            description="List the available experiments with their default parameters.",
            inputSchema={"type": "object", "properties": {}, "required": []},
        ),
        Tool(
            name="run_experiment",
            description=(
                "Run one experiment (fig1, fig2_sweep, twosite, convergence, regime_scan, ri_trace). "
                "Writes CSV and summary.json and returns the rows, built-in checks and artifact paths."
            ),
            inputSchema={
                "type": "object",
                "properties": {
                    "experiment": {
                        "type": "string",
                        "enum": ["fig1", "fig2_sweep", "twosite", "convergence", "regime_scan", "ri_trace"],
                    },
                    "overrides": {
                        "type": "object",
                        "description": "Config keys (N, h, J_x, J_y, beta_L, beta_R, ...) overriding the defaults",
                        "default": {},
                    },
                    "include_rows": {
                        "type": "boolean",
                        "description": "Return the CSV rows in the response",
                        "default": False,
                    },
                },
                "required": ["experiment"],
            },
        ),
        Tool(
            name="twosite_ness",
            description=(
                "Closed-form steady state of the two-site XX chain between two spin baths: "
                "spin current, work and heat rates, entropy production and stationary correlators."
            ),
            inputSchema=TWO_SITE_SCHEMA,
        ),
        Tool(
            name="classify_regime",
            description=(
                "Classify the two-site steady state as engine, refrigerator, heater, equilibrium or "
                "non-driven, with its efficiency and the Carnot bound."
            ),
            inputSchema=TWO_SITE_SCHEMA,
        ),
    ]


def _two_site(arguments: Any) -> TwoSiteParams:
    return TwoSiteParams(**(arguments or {}))


@app.call_tool()
async def call_tool(name: str, arguments: Any) -> list[TextContent]:
    """Handle tool calls.

    Args:
        name: Tool name
        arguments: Tool arguments

    Returns:
        List of text content responses
    """
    global runner

    try:
        if name == "list_experiments":
            return _text({"experiments": ExperimentRunner.list_experiments()})

        elif name == "run_experiment":
            arguments = arguments or {}
            try:
                config = ExperimentConfig.for_experiment(
                    arguments.get("experiment", ""), arguments.get("overrides") or {}
                )
            except Exception as e:
                return _text({"success": False, "error": f"Invalid parameters: {str(e)}"})

            if runner is None:
                runner = ExperimentRunner()

            # numerics are synchronous; keep the event loop free
            response = await asyncio.to_thread(runner.run, config)
            payload = response.model_dump()
            if not arguments.get("include_rows", False):
                payload["rows"] = len(payload.pop("data"))
            return _text(payload)

        elif name == "twosite_ness":
            try:
                params = _two_site(arguments)
            except Exception as e:
                return _text({"success": False, "error": f"Invalid parameters: {str(e)}"})
            result = ness_closed_form(params)
            return _text({"success": True, "M_L": params.M_L, "M_R": params.M_R, **result.model_dump()})

        elif name == "classify_regime":
            try:
                params = _two_site(arguments)
            except Exception as e:
                return _text({"success": False, "error": f"Invalid parameters: {str(e)}"})
            closed = ness_closed_form(params)
            record = ThermoRecord(
                Wdot_L=0.5 * closed.Wdot,
                Wdot_R=0.5 * closed.Wdot,
                Qdot_L=closed.Qdot_L,
                Qdot_R=closed.Qdot_R,
                S=0.0,
                dS_dt=0.0,
                diS_dt=closed.diS_dt,
                E_S=0.0,
                dE_dt=0.0,
                j_s=closed.j_s,
            )
            report = classify_regime(record, list(params.baths()))
            return _text(
                {
                    "success": True,
                    **report.model_dump(),
                    "Wdot": closed.Wdot,
                    "Qdot_L": closed.Qdot_L,
                    "Qdot_R": closed.Qdot_R,
                }
            )

        else:
            return _text({"success": False, "error": f"Unknown tool: {name}"})

    except Exception as e:
        logger.exception("tool %s failed", name)
        return _text({"success": False, "error": f"Error executing tool: {str(e)}"})


async def serve() -> None:
    """Run the MCP server over stdio."""
    global runner

    runner = ExperimentRunner()
    async with stdio_server() as (read_stream, write_stream):
        await app.run(read_stream, write_stream, app.create_initialization_options())


def main() -> None:
    """Main entry point for the boundary-driven MCP server."""
    # stdout carries the protocol
    logging.basicConfig(stream=sys.stderr, level=os.getenv("QTHERMO_LOG_LEVEL", "WARNING").upper())
    asyncio.run(serve())


if __name__ == "__main__":
    main()
