"""Independent reference implementations used by several test modules."""
from coopvod.topology import ServingTier


def brute_force_tier(holders, j, m, g, q):
    """Search order for a request at proxy ``q`` of group ``g``.

    ``holders`` maps group -> proxy index holding the video (absent if the
    group does not cache it).  Neighbours are found by modular arithmetic
    rather than the package's ring helpers.
    """
    own = holders.get(g)
    if own == q:
        return ServingTier.LOCAL_HIT, g, own
    ring_nbrs = {(q % m) + 1, ((q - 2) % m) + 1} - {q}
    if own is not None and own in ring_nbrs:
        return ServingTier.NEIGHBOR_PROXY, g, own
    if own is not None:
        return ServingTier.INTRA_GROUP_REMOTE, g, own
    for h in (((g - 2) % j) + 1, (g % j) + 1):
        if h != g and h in holders:
            return ServingTier.NEIGHBOR_GROUP, h, holders[h]
    return ServingTier.CMS_FETCH, None, None
