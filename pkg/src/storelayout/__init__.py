"""Store layout optimization: assign product categories to store locations
and subcategories to shelf sublocations so that expected shopper exposure
over shortest-path walks is maximized."""

__version__ = "1.0.0"
