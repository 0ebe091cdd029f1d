"""
Link overlap between two profiles
=================================

Two users match on a feature when both disclosed it and the values agree:
categorical traits must be equal, numeric ones within a tolerance.  The
link overlap is the fraction of mutually disclosed features that match.
"""

# a schema names each feature, its kind and (for numbers) a tolerance
from egohomophily import MISSING, FeatureDef, FeatureSchema, Profile, link_overlap, subset_overlap

schema = FeatureSchema([
    FeatureDef("gender", "cat"),
    FeatureDef("city", "cat"),
    FeatureDef("age", "num", 2),
])

# empty strings become MISSING when parsed
ann = Profile.from_raw(1, ["F", "Budapest", "31"], schema)
bob = Profile.from_raw(2, ["M", "Budapest", "33"], schema)
cat = Profile.from_raw(3, ["F", "", "45"], schema)
print(ann.traits, cat.traits[1] is MISSING)

# ann and bob share all three features and match on city and age
print("ann-bob", link_overlap(ann, bob, schema))

# ann and cat share only gender and age
print("ann-cat", link_overlap(ann, cat, schema))

# averaging over a group of alters gives the subset overlap
print("ann vs {bob, cat}", subset_overlap(ann, [bob, cat], schema))
