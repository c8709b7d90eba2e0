"""Print the four estimator tables for the bundled fixture and their deviations."""

from ouest.cli import format_tables, load_fixture, load_reference_estimates, reproduce_tables

if __name__ == "__main__":
    tables = reproduce_tables(load_fixture())
    print(format_tables(tables, load_reference_estimates()))
