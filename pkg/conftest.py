# Keeps the repository root importable (core, diffusions) when pytest runs from anywhere.
