"""Train on neighbourhoods, test on restaurants, with and without aspects.

In the synthetic neighbourhood corpus the same sentence ("LOCATION1 was
hot") is positive for one aspect and negative for another, so a predictor
that is never told the aspect cannot do better than guessing on it. The
restaurant sentences name a noun that gives the aspect away, which lets a
detector trained there fill in the aspect at test time.

Takes about a minute on one CPU core.
"""
import torch

from auxabsa import corpus, synthetic
from auxabsa.detector import AspectDetector
from auxabsa.pipeline import cross_domain_eval
from auxabsa.sentiment import SentimentPredictor
from auxabsa.trainer import Hyperparameters, SentimentFraming, evaluate, train

torch.set_num_threads(1)
toy = dict(encoder_lr=3e-3, head_lr=3e-3, epochs=20)

source = corpus.filter_single_target(corpus.parse_sentihood(synthetic.neighbourhood_json(480, seed=1)))
target = corpus.filter_single_target(corpus.parse_semeval(synthetic.restaurant_xml(400, seed=2), 2016))
inventory = corpus.aspect_inventory(target)
src, tgt = corpus.split(source, 0), corpus.split(target, 0)
test = corpus.with_polarity(tgt.test)
print(f"{len(source)} neighbourhood records, {len(target)} restaurant records, aspects {inventory.names}")

torch.manual_seed(0)
detector = AspectDetector(inventory)
train(detector, tgt, Hyperparameters.detector(**toy))
print("detector on restaurant test:", {k: round(v, 3) for k, v in evaluate(detector, tgt.test).items()})

for mode in ("right", "all", "none"):
    torch.manual_seed(0)
    predictor = SentimentPredictor()
    train(predictor, src, Hyperparameters.sentiment(**toy), SentimentFraming(mode, inventory))
    report, _ = cross_domain_eval(test, predictor, mode, inventory=inventory)
    print(f"{mode:>9}: F1-micro {report['f1_micro']:.3f}  F1-macro {report['f1_macro']:.3f}")
    if mode == "right":
        # same predictor, aspects supplied by the detector instead of gold labels
        report, dump = cross_domain_eval(test, predictor, "predicted", detector=detector, inventory=inventory)
        print(f"predicted: F1-micro {report['f1_micro']:.3f}  F1-macro {report['f1_macro']:.3f}")
        print("   e.g.", dump[0]["id"], dump[0]["aspects_used"], dump[0]["argmax"], "gold", dump[0]["gold"])
