"""Hand-enumerated geocode decision table (location type x tag x match x place description)."""

# columns: location_type  tag  match  place  ->  verdict  basis  reason
TABLE = """
ROOFTOP             yes full  yes  ACCEPT street OK
ROOFTOP             yes full  no   ACCEPT street OK
ROOFTOP             yes city  yes  ACCEPT place  OK
ROOFTOP             yes city  no   REJECT -      STREET_INACCURATE
ROOFTOP             yes none  yes  REJECT -      PLACE_INACCURATE
ROOFTOP             yes none  no   REJECT -      STREET_INACCURATE
ROOFTOP             no  full  yes  ACCEPT street OK
ROOFTOP             no  full  no   ACCEPT street OK
ROOFTOP             no  city  yes  ACCEPT place  OK
ROOFTOP             no  city  no   REJECT -      STREET_INACCURATE
ROOFTOP             no  none  yes  REJECT -      PLACE_INACCURATE
ROOFTOP             no  none  no   REJECT -      STREET_INACCURATE
GEOMETRIC_CENTER    yes full  yes  ACCEPT street OK
GEOMETRIC_CENTER    yes full  no   ACCEPT street OK
GEOMETRIC_CENTER    yes city  yes  ACCEPT place  OK
GEOMETRIC_CENTER    yes city  no   REJECT -      STREET_INACCURATE
GEOMETRIC_CENTER    yes none  yes  REJECT -      PLACE_INACCURATE
GEOMETRIC_CENTER    yes none  no   REJECT -      STREET_INACCURATE
GEOMETRIC_CENTER    no  full  yes  REJECT -      PLACE_IMPRECISE
GEOMETRIC_CENTER    no  full  no   REJECT -      STREET_IMPRECISE
GEOMETRIC_CENTER    no  city  yes  REJECT -      PLACE_IMPRECISE
GEOMETRIC_CENTER    no  city  no   REJECT -      STREET_IMPRECISE
GEOMETRIC_CENTER    no  none  yes  REJECT -      PLACE_IMPRECISE
GEOMETRIC_CENTER    no  none  no   REJECT -      STREET_IMPRECISE
RANGE_INTERPOLATED  yes full  yes  ACCEPT street OK
RANGE_INTERPOLATED  yes full  no   ACCEPT street OK
RANGE_INTERPOLATED  yes city  yes  ACCEPT place  OK
RANGE_INTERPOLATED  yes city  no   REJECT -      STREET_INACCURATE
RANGE_INTERPOLATED  yes none  yes  REJECT -      PLACE_INACCURATE
RANGE_INTERPOLATED  yes none  no   REJECT -      STREET_INACCURATE
RANGE_INTERPOLATED  no  full  yes  REJECT -      PLACE_IMPRECISE
RANGE_INTERPOLATED  no  full  no   REJECT -      STREET_IMPRECISE
RANGE_INTERPOLATED  no  city  yes  REJECT -      PLACE_IMPRECISE
RANGE_INTERPOLATED  no  city  no   REJECT -      STREET_IMPRECISE
RANGE_INTERPOLATED  no  none  yes  REJECT -      PLACE_IMPRECISE
RANGE_INTERPOLATED  no  none  no   REJECT -      STREET_IMPRECISE
APPROXIMATE         yes full  yes  REJECT -      PLACE_IMPRECISE
APPROXIMATE         yes full  no   REJECT -      STREET_IMPRECISE
APPROXIMATE         yes city  yes  REJECT -      PLACE_IMPRECISE
APPROXIMATE         yes city  no   REJECT -      STREET_IMPRECISE
APPROXIMATE         yes none  yes  REJECT -      PLACE_IMPRECISE
APPROXIMATE         yes none  no   REJECT -      STREET_IMPRECISE
APPROXIMATE         no  full  yes  REJECT -      PLACE_IMPRECISE
APPROXIMATE         no  full  no   REJECT -      STREET_IMPRECISE
APPROXIMATE         no  city  yes  REJECT -      PLACE_IMPRECISE
APPROXIMATE         no  city  no   REJECT -      STREET_IMPRECISE
APPROXIMATE         no  none  yes  REJECT -      PLACE_IMPRECISE
APPROXIMATE         no  none  no   REJECT -      STREET_IMPRECISE
"""

ORIGINAL = "123 Main St, Milwaukee, WI"
PLACE_DESC = "Cherry School"
FORMATTED = {
    "full": "123 Main Street, Milwaukee, WI 53202",
    "city": "900 Elm St, Milwaukee, WI",
    "none": "123 Main St, Madison, WI",
}
TAGS = {"yes": {"Point Of Interest", "premise"}, "no": {"premise", "street_address"}}


def cases():
    out = []
    for line in TABLE.strip().splitlines():
        loc, tag, match, place, verdict, basis, reason = line.split()
        out.append((loc, tag, match, place == "yes", verdict, None if basis == "-" else basis, reason))
    return out
