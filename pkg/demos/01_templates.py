"""How one review sentence becomes detector and sentiment-predictor inputs."""
from auxabsa.corpus import AspectInventory
from auxabsa.templating import (
    AspectMode,
    build_detector_input,
    build_sentiment_input,
    build_sentiment_query,
    render_with_specials,
)

sentence = "The food is delicious, but it's too expensive"
target = "the food"
inventory = AspectInventory(["quality", "price", "atmosphere"])

# The detector reads the aspect names first and the review second.
print(render_with_specials(build_detector_input(inventory, sentence)))
print()

# The sentiment predictor gets a question naming the aspects under review.
for mode in (AspectMode.right(["quality", "price"]), AspectMode.all(inventory), AspectMode.none()):
    paired = build_sentiment_input(build_sentiment_query(mode, target), sentence)
    print(f"{mode.kind:>5}: {render_with_specials(paired)}")
