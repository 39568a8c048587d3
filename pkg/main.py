"""Main entry point for the PIM OLAP simulator."""

from pim_olap_sim.cli.app import cli


def main():
    """Run the command-line interface."""
    cli()


if __name__ == "__main__":
    main()
