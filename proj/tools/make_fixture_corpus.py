#!/usr/bin/env python3
"""Regenerates the 20-work reference corpus under data/reference.

Images are synthetic monochrome silhouettes (black paper on white) with
punched holes, written as binary PGM. Everything is seeded so the output is
byte-identical across runs.
"""
import json
import math
import os
import random
import sys

ROOT = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "data", "reference")
SIZE = 128

WORKS = [
 # id, title, region, Function, Subject Matter, Style, Method, composites, explanations
 ("w01", "Magpies on the Plum Branch", "North China", "Festive Atmosphere Evoking", "Flora and Fauna", "Abstract", "Symbolism",
  ["magpie", "plum blossom"], "Pasted on windows to welcome spring at the new year", "Birds and blossoms of early spring", "Simplified silhouettes with bold holes", "The magpie stands for joyful news arriving with spring"),
 ("w02", "Peony in Full Bloom", "Central China", "Daily Decoration", "Flora and Fauna", "Realistic", "Symbolism",
  ["peony", "butterfly"], "Hung as a household ornament", "Peony flower with butterflies", "Detailed petals rendered with sawtooth", "Peony symbolizes wealth and honor"),
 ("w03", "Happiness Arrives", "East China", "Festive Atmosphere Evoking", "Flora and Fauna", "Abstract", "Homophony",
  ["bat", "magpie", "peony"], "Decorates doors during the spring festival", "Bats and magpies among flowers", "Geometric reduction of animals", "Bat sounds like fortune so the scene wishes happiness"),
 ("w04", "Wizard Exorcising Demons", "Northeast", "Witchcraft Belief", "Historical Figure and Story", "Abstract", "Metaphor",
  ["child figure", "cloud band"], "Used in shamanic rituals to drive away evil", "A wizard figure in a ritual", "Angular abstract figures", "Figures metaphorically confront unseen forces"),
 ("w05", "Herding Ducks in Watertown", "East China", "Indigenous Belief", "Folk Life", "Realistic", "Metaphor",
  ["mandarin duck", "boat", "wave border"], "Reflects local beliefs of a river town", "Villagers herding ducks by boat", "Realistic waterside scene", "Ducks on water hint at a peaceful life"),
 ("w06", "Guanyin Sitting on a Lotus", "Southwest", "Religious Belief", "Historical Figure and Story", "Realistic", "Symbolism",
  ["guanyin", "lotus"], "Offered in temple ceremonies", "Bodhisattva seated on a lotus", "Faithful figure with drapery", "The lotus symbolizes purity"),
 ("w07", "Happy Asian Games", "South China", "Cultural Dissemination", "Contemporary Subject", "Abstract", "Symbolism",
  ["child figure", "round medallion"], "Spreads news of a sporting event", "Athletes and mascots", "Stylized modern figures", "The medallion symbolizes unity and victory"),
 ("w08", "Mandarin Ducks in Water", "East China", "Interpersonal Communication", "Flora and Fauna", "Realistic", "Metaphor",
  ["mandarin duck", "lotus"], "Given as a wedding gift between families", "Paired ducks among lotus", "Lifelike birds and leaves", "Paired ducks are a metaphor for faithful love"),
 ("w09", "Solar Term Grain Full", "North China", "Festive Atmosphere Evoking", "Folk Life", "Abstract", "Symbolism",
  ["ox", "child figure"], "Marks a seasonal festival of the farming calendar", "Farmers and an ox in the field", "Abstract farm scene", "The ox symbolizes a plentiful harvest"),
 ("w10", "Butterfly Window Decoration", "Northwest", "Daily Decoration", "Flora and Fauna", "Abstract", "Symbolism",
  ["butterfly", "corner flower"], "Window ornament for everyday homes", "A butterfly among flowers", "Symmetric abstract wings", "The butterfly symbolizes love and freedom in spring"),
 ("w11", "Circular Floral Paper-cutting", "Northwest", "Daily Decoration", "Primitive Paper-cutting", "Abstract", "Symbolism",
  ["round medallion", "chrysanthemum"], "Ceiling flower for a cave dwelling", "Radial flower in early folk form", "Folded radial symmetry", "The round form symbolizes completeness"),
 ("w12", "The World Welcomes Spring", "Central China", "Festive Atmosphere Evoking", "Flora and Fauna", "Realistic", "Symbolism",
  ["magpie", "peony", "plum blossom"], "Celebrates the arrival of spring", "Magpies perched among peony and plum", "Rich realistic detail", "Magpie and plum together symbolize joy at the start of spring"),
 ("w13", "Lijiang Ancient Town", "Southwest", "Cultural Dissemination", "Landscape", "Realistic", "Metaphor",
  ["house", "pagoda", "wave border"], "Promotes a historic town", "Rooftops bridges and canals", "Architectural realism", "Flowing water suggests enduring heritage"),
 ("w14", "Jiang Ziya Fishing", "North China", "Cultural Dissemination", "Historical Figure and Story", "Realistic", "Metaphor",
  ["child figure", "fish", "boat"], "Retells a classic historical story", "An old sage fishing by the river", "Narrative figure composition", "Fishing without bait is a metaphor for patience"),
 ("w15", "The Mouse's Wedding", "Central China", "Interpersonal Communication", "Folk Life", "Abstract", "Metaphor",
  ["rat", "tassel"], "Shared during new year visits between families", "A procession of mice marrying", "Playful abstract figures", "The wedding is a humorous metaphor for family prosperity"),
 ("w16", "Genshin Impact Klee", "South China", "Cultural Dissemination", "Contemporary Subject", "Realistic", "Symbolism",
  ["child figure", "round medallion"], "Introduces paper-cutting to young game fans", "A modern game character", "Faithful character outline", "Bright motifs symbolize youthful energy"),
 ("w17", "Frog", "Southwest", "Indigenous Belief", "Flora and Fauna", "Abstract", "Symbolism",
  ["fish", "lotus"], "Expresses a local fertility belief", "A frog among lotus and fish", "Strongly abstract body", "The frog symbolizes fertility and rain"),
 ("w18", "Lujiazui Shanghai", "East China", "Cultural Dissemination", "Landscape", "Realistic", "Metaphor",
  ["pagoda", "house", "wave border"], "Shows a modern skyline", "Towers beside the river", "Precise realistic towers", "The rising skyline is a metaphor for progress"),
 ("w19", "Harmonious of Ethnicities", "Northwest", "Cultural Dissemination", "Folk Life", "Abstract", "Metaphor",
  ["child figure", "scroll vine"], "Celebrates unity among peoples", "Dancers in festive dress", "Rhythmic abstract figures", "Joined hands are a metaphor for harmony"),
 ("w20", "Enduring Lineage", "Northeast", "Festive Atmosphere Evoking", "Flora and Fauna", "Abstract", "Symbolism",
  ["pomegranate", "gourd", "butterfly"], "Displayed at spring festival family gatherings", "Fruits and butterflies in bloom", "Bold abstract fruit shapes", "Pomegranate seeds symbolize many descendants"),
]

UNIT_BY_SHAPE = {
  "circle": ("Geometric Unit", "circle"),
  "triangle": ("Geometric Unit", "triangle"),
  "square": ("Geometric Unit", "square"),
  "crescent": ("Semantic Unit", "crescent"),
  "teeth": ("Sawtooth", "straight sawtooth"),
}


def draw_work(seed):
    rng = random.Random(seed)
    img = [[255] * SIZE for _ in range(SIZE)]
    cx, cy = SIZE / 2 + rng.uniform(-4, 4), SIZE / 2 + rng.uniform(-4, 4)
    rx, ry = rng.uniform(44, 56), rng.uniform(40, 56)
    for y in range(SIZE):
        for x in range(SIZE):
            if ((x + 0.5 - cx) / rx) ** 2 + ((y + 0.5 - cy) / ry) ** 2 <= 1.0:
                img[y][x] = 20
    holes = []
    anchors = []
    shapes = ["circle", "triangle", "square", "crescent", "teeth"]
    placed = []
    tries = 0
    while len(placed) < 5 and tries < 400:
        tries += 1
        kind = shapes[len(placed) % len(shapes)] if rng.random() < 0.8 else rng.choice(shapes)
        r = rng.uniform(6, 10)
        hx, hy = rng.uniform(cx - rx * 0.55, cx + rx * 0.55), rng.uniform(cy - ry * 0.55, cy + ry * 0.55)
        if any(math.hypot(hx - px, hy - py) < r + pr + 5 for px, py, pr in placed):
            continue
        placed.append((hx, hy, r))
        holes.append(kind)
        anchors.append(None)
        for y in range(int(hy - r - 2), int(hy + r + 3)):
            for x in range(int(hx - r - 2), int(hx + r + 3)):
                if not (0 <= x < SIZE and 0 <= y < SIZE):
                    continue
                dx, dy = x + 0.5 - hx, y + 0.5 - hy
                inside = False
                if kind == "circle":
                    inside = dx * dx + dy * dy <= r * r
                elif kind == "square":
                    inside = abs(dx) <= r * 0.8 and abs(dy) <= r * 0.8
                elif kind == "triangle":
                    inside = dy <= r * 0.7 and dy >= -r and abs(dx) <= (dy + r) * 0.6
                elif kind == "crescent":
                    inside = dx * dx + dy * dy <= r * r and (dx - r * 0.5) ** 2 + dy * dy > (r * 0.8) ** 2
                elif kind == "teeth":
                    period = 4.0
                    phase = ((dx + r) % period) / period
                    tooth = r * 0.5 * (1 - abs(2 * phase - 1))
                    inside = abs(dx) <= r and -r * 0.35 <= dy <= r * 0.15 + tooth
                if inside:
                    img[y][x] = 235
                    if anchors[-1] is None:
                        anchors[-1] = (x, y)
    return img, holes, anchors


def write_pgm(path, img):
    with open(path, "wb") as f:
        f.write(b"P5\n%d %d\n255\n" % (SIZE, SIZE))
        for row in img:
            f.write(bytes(row))


def main():
    os.makedirs(os.path.join(ROOT, "images"), exist_ok=True)
    with open(os.path.join(ROOT, "taxonomy.json"), encoding="utf-8") as f:
        meaning = {i["pattern_name"]: i["meaning"] for i in json.load(f)["interpretations"]}
    ann, tmpl, pat, queries = [], [], [], []
    for i, (wid, title, region, fn, sm, st, me, comps, e_fn, e_sm, e_st, e_me) in enumerate(WORKS):
        img, holes, anchors = draw_work(1000 + i)
        write_pgm(os.path.join(ROOT, "images", wid + ".pgm"), img)
        ann.append({
            "work_id": wid, "title": title, "region": region, "image_ref": "images/%s.pgm" % wid,
            "assignments": [
                {"factor": "Function", "type": fn, "explanation": e_fn},
                {"factor": "Subject Matter", "type": sm, "explanation": e_sm},
                {"factor": "Style", "type": st, "explanation": e_st},
                {"factor": "Method of Expression", "type": me, "explanation": e_me},
            ],
            "composite_patterns": comps,
        })
        tmpl.append({"work_id": wid,
                     "question": "Suggest content for a %s paper-cutting about %s in the %s style." % (fn.lower(), sm.lower(), st.lower()),
                     "answer": "OBJECTS:\n" + "\n".join("- %s — %s" % (c, meaning[c]) for c in comps[:2]) +
                               "\nPATTERNS:\n- %s — %s" % (UNIT_BY_SHAPE[holes[0]][1], meaning[UNIT_BY_SHAPE[holes[0]][1]])})
        tmpl.append({"work_id": wid,
                     "question": "How does '%s' express its meaning through %s?" % (title, me.lower()),
                     "answer": "OBJECTS:\n- %s — %s\nPATTERNS:\n- %s — %s" % (comps[0], e_me, UNIT_BY_SHAPE[holes[-1]][1], meaning[UNIT_BY_SHAPE[holes[-1]][1]])})
        for j, kind in enumerate(holes[:2]):
            sub, name = UNIT_BY_SHAPE[kind]
            pat.append({"cutout_id": "%s-a%d" % (wid, j + 1), "work_id": wid, "subcategory": sub,
                        "pattern_name": name,
                        "geometry_ref": "images/%s.pgm#%d,%d" % (wid, anchors[j][0], anchors[j][1])})
        queries.append({"query_text": title.lower(), "gt_id": wid})

    def dump(name, schema, records):
        with open(os.path.join(ROOT, name), "w", encoding="utf-8") as f:
            f.write(json.dumps({"schema": schema, "version": 1}) + "\n")
            for r in records:
                f.write(json.dumps(r, ensure_ascii=False, sort_keys=True) + "\n")

    dump("annotations.jsonl", "cutstudio.annotations", ann)
    dump("templates.jsonl", "cutstudio.templates", tmpl)
    dump("pattern_annotations.jsonl", "cutstudio.pattern_annotations", pat)
    dump("queries.jsonl", "cutstudio.queries", queries)
    with open(os.path.join(ROOT, "MANIFEST.json"), "w") as f:
        regions = {}
        for a in ann:
            regions[a["region"]] = regions.get(a["region"], 0) + 1
        json.dump({"works": len(ann), "templates": len(tmpl), "pattern_annotations": len(pat),
                   "regions": dict(sorted(regions.items()))}, f, indent=1, sort_keys=True)
        f.write("\n")


if __name__ == "__main__":
    sys.exit(main())
