"""Write a synthetic dataset CSV for trying the command-line workflow.

Draws from a built-in design (4 correlated continuous predictors,
target c-statistic 0.75, 20% events) and writes train/score CSVs to the
working directory.  The score file keeps the generating probabilities
so downstream evaluation can be compared against the truth.

Usage: python demos/make_demo_data.py [n_train] [n_score]
"""

import sys

from forestlab.rng import derive_seed, make_rng
from forestlab.synthetic import Dataset, builtin_designs, generate_dataset, write_dataset_csv


def main() -> None:
    n_train = int(sys.argv[1]) if len(sys.argv) > 1 else 2000
    n_score = int(sys.argv[2]) if len(sys.argv) > 2 else 1000
    design = next(d for d in builtin_designs() if d.label == "b_4c_75_0_bal")

    train = generate_dataset(design, n_train, make_rng(derive_seed(42, "demo-train")))
    score = generate_dataset(design, n_score, make_rng(derive_seed(42, "demo-score")))

    # the training file plays the role of collected data: no true_p column
    write_dataset_csv(Dataset(x=train.x, y=train.y), "demo_train.csv")
    write_dataset_csv(score, "demo_score.csv")
    print(f"wrote demo_train.csv ({n_train} cases) and demo_score.csv ({n_score} cases)")
    print(f"design: {design.label} (event fraction 0.2, target c {design.target_auc})")
    print("next: forestlab fit --data demo_train.csv --out demo.npz --seed 1")


if __name__ == "__main__":
    main()
