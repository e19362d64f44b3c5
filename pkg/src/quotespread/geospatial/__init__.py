from .geocoder import GeoCache, GeocodeError, Geocoder, GeocoderSettings, location_key
from .gyration import (
    DirectionSummary,
    GyrationMode,
    GyrationResult,
    centroid,
    compare_to_reference,
    haversine_km,
    propaganda_center,
    radius_of_gyration,
)

__all__ = [
    "DirectionSummary",
    "GeoCache",
    "GeocodeError",
    "Geocoder",
    "GeocoderSettings",
    "GyrationMode",
    "GyrationResult",
    "centroid",
    "compare_to_reference",
    "haversine_km",
    "location_key",
    "propaganda_center",
    "radius_of_gyration",
]
