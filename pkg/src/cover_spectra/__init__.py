"""Random covers of graphs: spectra, expected subgraph counts and trace experiments."""

__version__ = "0.1.0"
