"""wedge-intensity test suite."""
