"""
Character language model perplexity
===================================

A smoothed character n-gram model scores fluent text lower (fewer bits per
character) than scrambled text drawn from the same characters.
"""

import random

from xlsum import charlm

rng = random.Random(0)
words = ["ljubljana", "je", "glavno", "mesto", "slovenije", "reka", "teče", "skozi", "center"]
corpus = [" ".join(rng.choices(words, k=rng.randint(4, 10))) + "." for _ in range(2000)]

model = charlm.train(corpus, order=5, seed=0)
print("discounts per order:", [round(d, 2) for d in model.discounts])

fluent = "ljubljana je glavno mesto."
scrambled = "".join(rng.sample(fluent, len(fluent)))
for text in (fluent, scrambled):
    print(f"{charlm.bits_per_char(model, text).bits_per_char:6.3f}  {text!r}")

# A uniform model over k symbols costs log2(k) bits for every character
print(charlm.bits_per_char(charlm.CharLM.uniform("ab"), "abba").bits_per_char)
