"""Synthetic rating/KG files with planted cluster structure.

Items belong to latent genres; every item links to its genre entity and to a
few shared attribute entities through distinct relations, and users draw most
of their positives from one or two preferred genres. Used by the demos and the
end-to-end tests when the public benchmarks are not on disk.
"""
from __future__ import annotations

import os

import numpy as np


def make_dataset(directory, n_users=200, n_items=300, n_genres=6, per_user=(5, 25),
                 noise=0.1, n_attributes=40, seed=0):
    """Write ``ratings.tsv`` and ``kg.tsv`` under ``directory`` and return their paths.

    Item ``v`` is entity ``v``; genre entities follow the items, then attribute
    entities. Relation 0 links items to genres, relations 1-3 to attributes.
    """
    rng = np.random.default_rng(seed)
    genre = rng.integers(n_genres, size=n_items)
    genre_ent = n_items + np.arange(n_genres)
    attr_ent = n_items + n_genres + np.arange(n_attributes)
    # attributes are themselves genre-leaning
    attr_genre = rng.integers(n_genres, size=n_attributes)

    triples = []
    for v in range(n_items):
        triples.append((v, 0, genre_ent[genre[v]]))
        same = attr_ent[attr_genre == genre[v]]
        for rel in (1, 2, 3):
            pool = same if len(same) and rng.random() > 0.3 else attr_ent
            triples.append((v, rel, int(rng.choice(pool))))

    rows = []
    for u in range(n_users):
        liked = rng.choice(n_genres, size=rng.integers(1, 3), replace=False)
        count = int(rng.integers(per_user[0], per_user[1] + 1))
        in_pref = np.flatnonzero(np.isin(genre, liked))
        picks = set()
        while len(picks) < min(count, n_items):
            if rng.random() < noise or not len(in_pref):
                picks.add(int(rng.integers(n_items)))
            else:
                picks.add(int(rng.choice(in_pref)))
        for v in sorted(picks):
            rows.append((f"u{u}", v, 1.0))

    os.makedirs(directory, exist_ok=True)
    ratings = os.path.join(directory, "ratings.tsv")
    kg = os.path.join(directory, "kg.tsv")
    with open(ratings, "w", encoding="utf-8") as fh:
        fh.write("# user item rating\n")
        for u, v, r in rows:
            fh.write(f"{u}\t{v}\t{r}\n")
    with open(kg, "w", encoding="utf-8") as fh:
        for h, r, t in triples:
            fh.write(f"{h}\t{r}\t{t}\n")
    return ratings, kg
