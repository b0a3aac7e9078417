"""Sample new token sequences under grammar masks and rebuild solids.

The n-gram harness stands in for a learned sequence model: every sampled
token is drawn from the model's conditional distribution restricted to the
grammar's validity mask, so each non-truncated sample parses.

Run:  python demos/demo_05_generate_and_complete.py
"""
from brepcodec import (
    CodecConfig,
    SamplerConfig,
    VocabLayout,
    autocomplete,
    decode_tokens,
    encode_model,
    fit_ngram,
    lossless_codebook,
    normalize,
    sample_sequence,
)
from brepcodec.primitives import box, ngon_prism

cfg = CodecConfig()
cube, _ = normalize(box())
codebook = lossless_codebook(cube)
layout = VocabLayout.for_codebook(codebook)

corpus = [encode_model(box(), codebook) for _ in range(6)] \
    + [encode_model(ngon_prism(n=4), codebook) for _ in range(2)]
lm = fit_ngram(corpus, order=4, smoothing=0.1, vocab_size=layout.vocab_size)
print(f"fitted order-4 model: {len(lm.counts)} contexts over "
      f"{layout.vocab_size} token ids")

print()
print("=== 30 mask-constrained samples ===")
parsed = watertight = truncated = 0
for seed in range(30):
    res = sample_sequence(lm, layout, SamplerConfig(seed=seed, temperature=0.4))
    if res.truncated:
        truncated += 1
        continue
    model, report = decode_tokens(res.tokens, codebook, cfg)
    parsed += 1
    watertight += bool(report.success)
print(f"parsed: {parsed}, truncated: {truncated}, "
      f"reconstructed watertight: {watertight}")

print()
print("=== autocompletion from a component boundary ===")
prefix = corpus[0].tokens[:-1] + [layout.sep]
for seed in (0, 1):
    res = autocomplete(prefix, lm, layout,
                       SamplerConfig(seed=seed, temperature=0.5))
    kept = res.tokens[: len(prefix)] == prefix
    print(f"seed {seed}: {len(res.tokens) - len(prefix)} new tokens, "
          f"prefix intact: {kept}, truncated: {res.truncated}")
