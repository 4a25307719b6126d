# Regenerates the end-to-end fixtures and computes the expected extremes
# and export independently of the Rust scorer.
import hashlib, itertools, json, math, re, os
OUT = os.path.dirname(os.path.abspath(__file__))
os.makedirs(OUT, exist_ok=True)

TEMPLATE = """My goal is to transform the original sentence into both more common and less common expressions.
Note: Do not omit any words such as verbs, adjectives, nouns, or adverbs.
You must generate two types of sentences:
(1) ten sentences using less common, more complex words.
(2) ten sentences using more common, simpler words.
Return all 20 sentences directly, separated by |||| and do not use numbering.
Original sentence: {sentence}"""

counts = {
 "the": 5000, "a": 4200, "has": 900, "have": 700, "and": 4800, "buys": 120, "purchases": 15, "acquires": 6,
 "more": 800, "additional": 90, "extra": 150, "further": 60, "apples": 80, "pommes": 1, "fruits": 40,
 "tom": 200, "thomas": 30, "3": 600, "2": 900, "4": 500, "5": 450, "10": 300,
 "farmer": 70, "agriculturist": 2, "grower": 9, "sells": 110, "vends": 1, "trades": 25, "cows": 50, "cattle": 35, "bovines": 1,
 "every": 400, "each": 420, "week": 260, "sennight": 1, "weekly": 40,
 "bus": 140, "omnibus": 3, "coach": 45, "carries": 60, "transports": 12, "conveys": 4, "people": 700, "passengers": 55, "riders": 20,
 "to": 6000, "school": 380, "academy": 25, "seminary": 3,
 "mary": 180, "reads": 100, "peruses": 2, "studies": 70, "pages": 90, "leaves": 85, "folios": 1, "of": 5500, "her": 1200, "book": 300, "tome": 4, "volume": 60,
 "on": 3000, "monday": 150,
 "jar": 60, "vessel": 30, "receptacle": 3, "holds": 110, "contains": 140, "encloses": 5, "marbles": 12, "spheres": 6, "balls": 90,
}
total = 100000
srcs = [
 ("gsm-001", "Tom has 3 apples and buys 2 more.", "5",
  [["tom","thomas"],["has"],["3"],["apples","fruits","pommes"],["and"],["buys","purchases","acquires"],["2"],["more","additional","extra","further"]]),
 ("gsm-002", "A farmer sells 4 cows every week.", "16",
  [["a"],["farmer","grower","agriculturist"],["sells","trades","vends"],["4"],["cows","cattle","bovines"],["every","each"],["week","sennight"]]),
 ("gsm-003", "The bus carries 10 people to school.", "10",
  [["the"],["bus","coach","omnibus"],["carries","transports","conveys"],["10"],["people","passengers","riders"],["to"],["school","academy","seminary"]]),
 ("gsm-004", "Mary reads 5 pages of her book on Monday.", "5",
  [["mary"],["reads","studies","peruses"],["5"],["pages","leaves","folios"],["of"],["her"],["book","volume","tome"],["on"],["monday"]]),
 ("gsm-005", "The jar holds 4 marbles.", "4",
  [["the"],["jar","vessel","receptacle"],["holds","contains","encloses"],["4"],["marbles","balls","spheres"]]),
]
def cap(ws):
    s = " ".join(ws)
    return s[0].upper() + s[1:] + "."
def tokens(s):
    return re.findall(r"[a-z0-9]+", s.lower())
def log_sfreq(s):
    t = tokens(s)
    return sum(math.log(max(counts[w]/total, 1e-9)) for w in t)/len(t)

fixture = {}
expected = []
for idx, (sid, text, gt, slots) in enumerate(srcs):
    combos = [cap(c) for c in itertools.product(*slots)]
    combos = sorted(set(combos), key=lambda s: (log_sfreq(s), s))
    # take spread: 10 rare then 10 common, with interleaving for a non-trivial order
    rare, common = combos[:10], combos[-10:]
    cands = rare + common
    # deterministic shuffle
    order = sorted(range(20), key=lambda i: hashlib.sha256(f"{sid}-{i}".encode()).hexdigest())
    cands = [cands[i] for i in order]
    if sid == "gsm-003":
        cands = cands[:19]  # malformed
    prompt = TEMPLATE.replace("{sentence}", text)
    h = hashlib.sha256(prompt.encode()).hexdigest()
    if sid != "gsm-005":
        fixture[h] = " |||| ".join(cands) if idx % 2 == 0 else "||||".join(cands)
    if len(cands) == 20 and sid != "gsm-005":
        scores = [log_sfreq(c) for c in cands]
        hi = max(range(20), key=lambda i: (scores[i], -i)); lo = min(range(20), key=lambda i: (scores[i], i))
        assert scores.count(scores[hi]) == 1 and scores.count(scores[lo]) == 1, sid
        expected.append(dict(source_id=sid, high_index=hi, low_index=lo, high_text=cands[hi], low_text=cands[lo], gt=gt))

with open(f"{OUT}/mock_fixture.tsv", "w") as f:
    for h in sorted(fixture):
        f.write(f"{h}\t{fixture[h]}\n")
with open(f"{OUT}/sources.jsonl", "w") as f:
    for sid, text, gt, _ in srcs:
        f.write(json.dumps({"id": sid, "text": text, "ground_truth": gt}) + "\n")
with open(f"{OUT}/reference.tfl", "w") as f:
    f.write(f"tfl-table/1 {total} e2e-reference\n")
    keys = sorted(counts, key=lambda k: k.encode())
    for k in keys:
        f.write(f"{k}\t{counts[k]}\n")
    f.write(f"#end {len(keys)}\n")
# annotation script: gsm-001 and gsm-004 unanimous Same; gsm-002 gets one MaybeSame
accepted = {"gsm-001", "gsm-004"}
with open(f"{OUT}/expected_extremes.json", "w") as f:
    json.dump(expected, f, indent=1)
with open(f"{OUT}/golden_export.jsonl", "w") as f:
    for e in sorted(expected, key=lambda e: e["source_id"]):
        if e["source_id"] in accepted:
            f.write(json.dumps({"source_id": e["source_id"], "high_text": e["high_text"], "low_text": e["low_text"], "ground_truth": e["gt"]}, separators=(",", ":"), ensure_ascii=False) + "\n")
for e in expected: print(e["source_id"], e["low_index"], e["high_index"], e["low_text"], "|", e["high_text"])
