#!/usr/bin/env python3
"""Write a small WordNet noun database (WNDB format) used by tests and the simulator.

Usage: gen_wordnet_fixture.py OUT_DIR
"""
import sys
from pathlib import Path

HEADER = [
    "  1 This is a reduced noun database in WordNet 3.0 file format.",
    "  2 Synsets and glosses are hand-written for testing; offsets are byte positions.",
    "  3 ",
]

# name: (words, hyponym names, gloss)
SYNSETS = {
    "artifact": (["artifact", "artefact"], ["vehicle", "container", "headdress", "toy"], "a man-made object"),
    "vehicle": (["vehicle"], ["wheeled_vehicle", "vessel", "motor_vehicle"], "a conveyance that transports people or objects"),
    "wheeled_vehicle": (["wheeled_vehicle"], ["bicycle", "train"], "a vehicle that moves on wheels"),
    "motor_vehicle": (["motor_vehicle"], ["car"], "a self-propelled wheeled vehicle"),
    "car": (["car", "auto", "automobile"], ["convertible", "hatchback"], "a motor vehicle with four wheels"),
    "convertible": (["convertible"], [], "a car that has top that can be folded"),
    "hatchback": (["hatchback"], [], "a car having a hatchback door"),
    "train": (["train", "railroad_train"], [], "public transport provided by a line of railway cars"),
    "bicycle": (["bicycle", "bike", "wheel", "cycle"], ["mountain_bike", "road_bike", "tandem", "velocipede", "penny-farthing"], "a wheeled vehicle that has two wheels and is moved by foot pedals"),
    "mountain_bike": (["mountain_bike", "all-terrain_bike", "off-roader"], ["suspension_fork"], "a bicycle with a sturdy frame and fat tires"),
    "suspension_fork": (["suspension_fork"], [], "the front fork of a bicycle fitted with shock absorbers"),
    "road_bike": (["road_bike"], [], "a light bicycle built for paved roads"),
    "tandem": (["tandem", "tandem_bicycle", "bicycle-built-for-two"], [], "a bicycle with two sets of pedals and two seats"),
    "velocipede": (["velocipede"], [], "any of several early bicycles"),
    "penny-farthing": (["penny-farthing", "ordinary", "ordinary_bicycle"], [], "an early bicycle with a very large front wheel"),
    "vessel": (["vessel", "watercraft"], ["boat"], "a craft designed for water transportation"),
    "boat": (["boat"], ["rowboat", "sailboat"], "a small vessel for travel on water"),
    "rowboat": (["rowboat"], ["skiff", "dory", "punt"], "a small boat propelled with oars"),
    "skiff": (["skiff"], [], "any of various small boats propelled by oars or by sails or by a motor"),
    "dory": (["dory"], [], "a boat with a flat bottom and high sides"),
    "punt": (["punt"], [], "an open boat with a flat bottom and square ends"),
    "sailboat": (["sailboat", "sailing_boat"], ["catamaran", "sloop"], "a small sailing vessel"),
    "catamaran": (["catamaran"], [], "a sailboat with two parallel hulls"),
    "sloop": (["sloop"], [], "a sailing vessel with a single mast"),
    "container": (["container"], ["vase", "cup"], "any object that can be used to hold things"),
    "vase": (["vase"], [], "an open jar of glass or porcelain used as an ornament or to hold flowers"),
    "cup": (["cup"], ["teacup", "mug"], "a small open container usually used for drinking"),
    "teacup": (["teacup"], [], "a cup from which tea is drunk"),
    "mug": (["mug"], [], "with handle and usually cylindrical"),
    "headdress": (["headdress", "headgear"], ["hat"], "clothing for the head"),
    "hat": (["hat", "chapeau", "lid"], ["cap", "sunhat"], "headdress that protects the head from bad weather"),
    "cap": (["cap"], ["beret", "beanie", "skullcap"], "a tight-fitting headdress"),
    "beret": (["beret"], [], "a cap with no brim or bill"),
    "beanie": (["beanie", "beany"], [], "a small skullcap"),
    "skullcap": (["skullcap"], [], "rounded brimless cap fitting the crown of the head"),
    "sunhat": (["sunhat"], ["sombrero", "panama"], "a hat with a broad brim that protects the face from the sun"),
    "sombrero": (["sombrero"], [], "a straw hat with a tall crown and broad brim"),
    "panama": (["panama", "panama_hat"], [], "a hat made of the plaited leaves of the jipijapa plant"),
    "toy": (["toy"], ["kite", "teddy"], "an artifact designed to be played with"),
    "kite": (["kite"], [], "plaything consisting of a light frame covered with tissue paper"),
    "teddy": (["teddy", "teddy_bear"], [], "a child's stuffed toy bear"),
    "organism": (["organism", "being"], ["animal", "plant"], "a living thing"),
    "animal": (["animal", "beast"], ["bird", "dog", "cat", "horse", "elephant", "giraffe"], "a living organism characterized by voluntary movement"),
    "bird": (["bird"], ["songbird", "raptor"], "warm-blooded egg-laying vertebrates with feathers"),
    "songbird": (["songbird", "songster"], ["sparrow", "finch", "robin"], "any bird having a musical call"),
    "sparrow": (["sparrow", "true_sparrow"], [], "small brownish bird"),
    "finch": (["finch"], [], "any of numerous small songbirds with short stout bills"),
    "robin": (["robin", "redbreast"], [], "small Old World songbird with a reddish breast"),
    "raptor": (["raptor", "raptorial_bird", "bird_of_prey"], ["eagle", "hawk", "kite_bird"], "any of numerous carnivorous birds"),
    "eagle": (["eagle", "bird_of_Jove"], [], "any of various large keen-sighted diurnal birds of prey"),
    "hawk": (["hawk"], [], "diurnal bird of prey typically having short rounded wings"),
    "kite_bird": (["kite"], [], "any of several small graceful hawks"),
    "dog": (["dog", "domestic_dog"], ["poodle", "terrier"], "a member of the genus Canis"),
    "poodle": (["poodle", "poodle_dog"], [], "an intelligent dog with a heavy curly coat"),
    "terrier": (["terrier"], [], "any of several usually small short-bodied breeds"),
    "cat": (["cat", "true_cat"], [], "feline mammal usually having thick soft fur"),
    "horse": (["horse", "Equus_caballus"], [], "solid-hoofed herbivorous quadruped"),
    "elephant": (["elephant"], [], "five-toed pachyderm"),
    "giraffe": (["giraffe", "camelopard"], [], "tallest living quadruped"),
    "plant": (["plant", "flora"], ["flower", "tree"], "a living organism lacking the power of locomotion"),
    "flower": (["flower"], ["wildflower", "orchid"], "a plant cultivated for its blooms"),
    "wildflower": (["wildflower", "wild_flower"], ["buttercup", "bluebell", "harebell"], "wild or uncultivated flowering plant"),
    "buttercup": (["buttercup", "butterflower"], [], "perennial herb with bright yellow flowers"),
    "bluebell": (["bluebell"], [], "sometimes placed in genus Scilla"),
    "harebell": (["harebell"], [], "perennial with slender stems and blue bell-shaped flowers"),
    "orchid": (["orchid", "orchidaceous_plant"], ["cattleya", "vanda"], "any of numerous plants of the orchid family"),
    "cattleya": (["cattleya"], [], "any of various orchids with showy flowers"),
    "vanda": (["vanda"], [], "any of various showy orchids"),
    "tree": (["tree"], ["conifer", "palm"], "a tall perennial woody plant"),
    "conifer": (["conifer", "coniferous_tree"], ["pine", "spruce", "fir"], "any gymnospermous tree or shrub bearing cones"),
    "pine": (["pine", "pine_tree"], [], "a coniferous tree"),
    "spruce": (["spruce"], [], "any coniferous tree of the genus Picea"),
    "fir": (["fir", "fir_tree"], [], "nonresinous wood of a fir tree"),
    "palm": (["palm", "palm_tree"], ["palmetto", "rattan"], "any plant of the family Palmae"),
    "palmetto": (["palmetto"], [], "any of several low-growing palms with fan-shaped leaves"),
    "rattan": (["rattan", "rattan_palm"], [], "climbing palm of Sri Lanka"),
    "food": (["food", "solid_food"], ["fruit", "pastry"], "any solid substance used as a source of nourishment"),
    "fruit": (["edible_fruit"], ["apple"], "edible reproductive body of a seed plant"),
    "apple": (["apple"], ["crab_apple", "cider_apple", "russet"], "fruit with red or yellow or green skin"),
    "crab_apple": (["crab_apple", "crabapple"], [], "small sour apple"),
    "cider_apple": (["cider_apple"], [], "any of various apples grown for pressing into cider"),
    "russet": (["russet"], [], "an apple with a rough brownish skin"),
    "pastry": (["pastry"], ["donut"], "a dough of flour and water and shortening"),
    "donut": (["doughnut", "donut", "sinker"], [], "a small ring-shaped friedcake"),
    "furniture": (["furniture", "piece_of_furniture"], ["bench", "chair"], "furnishings that make a room ready for occupancy"),
    "bench": (["bench"], [], "a long seat for more than one person"),
    "chair": (["chair"], [], "a seat for one person with a support for the back"),
    "timepiece": (["timepiece", "timekeeper"], ["clock"], "a measuring instrument for keeping time"),
    "clock": (["clock"], [], "a timepiece that shows the time of day"),
    "canopy": (["canopy"], ["umbrella"], "a covering that provides shelter"),
    "umbrella": (["umbrella"], [], "a lightweight handheld collapsible canopy"),
}

# Extra senses listed after the first one in index.noun.
EXTRA_SENSES = {"kite": ["kite_bird"]}


def data_line(name, offsets, parents):
    words, hyponyms, gloss = SYNSETS[name]
    parts = [offsets[name], "06", "n", "%02x" % len(words)]
    for w in words:
        parts += [w, "0"]
    ptrs = []
    for p in parents.get(name, []):
        ptrs.append(["@", offsets[p], "n", "0000"])
    for h in hyponyms:
        ptrs.append(["~", offsets[h], "n", "0000"])
    parts.append("%03d" % len(ptrs))
    for p in ptrs:
        parts += p
    return " ".join(parts) + " | " + gloss + "  "


def main():
    out = Path(sys.argv[1])
    out.mkdir(parents=True, exist_ok=True)
    parents = {}
    for name, (_, hyponyms, _) in SYNSETS.items():
        for h in hyponyms:
            if h not in SYNSETS:
                sys.exit("unknown hyponym " + h)
            parents.setdefault(h, []).append(name)
    names = sorted(SYNSETS)
    # Offsets depend on line lengths, which depend on offsets; all offsets are
    # 8 digits so one pass with placeholders fixes every length.
    offsets = {n: "00000000" for n in names}
    header = "".join(h + "\n" for h in HEADER)
    pos = len(header.encode())
    for n in names:
        offsets[n] = "%08d" % pos
        pos += len(data_line(n, offsets, parents).encode()) + 1
    data = header + "".join(data_line(n, offsets, parents) + "\n" for n in names)
    for n in names:
        assert data.encode()[int(offsets[n]):].startswith(offsets[n].encode())
    (out / "data.noun").write_text(data)

    index = {}
    for n in names:
        for w in SYNSETS[n][0]:
            index.setdefault(w.lower(), [])
    for n in names:
        for w in SYNSETS[n][0]:
            senses = index[w.lower()]
            if n not in senses and n not in sum(EXTRA_SENSES.values(), []):
                senses.insert(0, n)
    for w, extra in EXTRA_SENSES.items():
        index[w] += extra
    lines = []
    for lemma in sorted(index):
        senses = index[lemma]
        ptr_symbols = sorted({"@"} | ({"~"} if any(SYNSETS[s][1] for s in senses) else set()))
        lines.append(" ".join([lemma, "n", str(len(senses)), str(len(ptr_symbols))] + ptr_symbols +
                              [str(len(senses)), "0"] + [offsets[s] for s in senses]) + "  ")
    (out / "index.noun").write_text(header + "\n".join(lines) + "\n")


if __name__ == "__main__":
    main()
