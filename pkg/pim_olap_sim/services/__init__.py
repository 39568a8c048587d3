"""Service layer: hardware models, the column store, the query engine and experiments."""
