#!/usr/bin/env python3
"""Reference trainer for the emoflow fine-tuning bridge (protocol v1).

Fine-tunes a locally downloaded encoder (IndoBERT, DistilBERT, ...) with a
five-way classification head using the transformers Trainer, then serves
predictions from the saved checkpoint.

Invocation:  hf_trainer.py --request <request.json>

Train request:
  {"schema_version": 1, "mode": "train", "encoder_dir": "...",
   "encoder_name": "...", "device": "cpu|cuda:N",
   "config": {"epochs": ..., "batch_size": ..., "learning_rate": ...,
              "dropout_probability": ..., "weight_decay": ...,
              "early_stopping": {"enabled": ..., "patience": ...},
              "seed": ...},
   "train_file": "train.jsonl", "validation_file": "validation.jsonl",
   "model_dir": "out"}

Predict request:
  {"schema_version": 1, "mode": "predict", "model_dir": "...",
   "texts_file": "texts.jsonl", "output_file": "probs.jsonl"}

Events are printed to stdout as JSON lines:
  {"event": "epoch", "epoch": 1, "train_loss": ..., "validation_loss": ...,
   "validation_accuracy": ...}
  {"event": "trained", "model_dir": "...", "selected_epoch": 1}
  {"event": "predicted", "count": N}
  {"event": "error", "message": "..."}

Non-finite losses are emitted as null, never as NaN literals.

Requires: torch, transformers, numpy.
"""

import argparse
import json
import math
import sys

LABELS = ["Happy", "Anger", "Sadness", "Love", "Fear"]
LABEL_TO_ID = {name: idx for idx, name in enumerate(LABELS)}
MAX_LENGTH = 256


def emit(payload):
    print(json.dumps(payload), flush=True)


def fail(message):
    emit({"event": "error", "message": str(message)})
    sys.exit(3)


def finite_or_none(value):
    if value is None:
        return None
    value = float(value)
    return value if math.isfinite(value) else None


def read_jsonl(path):
    rows = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    return rows


def run_train(request):
    import numpy as np
    import torch
    from transformers import (
        AutoConfig,
        AutoModelForSequenceClassification,
        AutoTokenizer,
        EarlyStoppingCallback,
        Trainer,
        TrainingArguments,
        set_seed,
    )

    config = request["config"]
    set_seed(int(config["seed"]))

    encoder_dir = request["encoder_dir"]
    tokenizer = AutoTokenizer.from_pretrained(encoder_dir)
    model_config = AutoConfig.from_pretrained(
        encoder_dir,
        num_labels=len(LABELS),
        id2label={i: name for i, name in enumerate(LABELS)},
        label2id=LABEL_TO_ID,
    )
    # The tuned dropout applies to the classification head.
    dropout = float(config["dropout_probability"])
    for attr in ("classifier_dropout", "seq_classif_dropout", "classifier_dropout_prob"):
        if hasattr(model_config, attr):
            setattr(model_config, attr, dropout)
    model = AutoModelForSequenceClassification.from_pretrained(
        encoder_dir, config=model_config
    )

    def encode(rows):
        texts = [row["text"] for row in rows]
        labels = [LABEL_TO_ID[row["label"]] for row in rows]
        batch = tokenizer(
            texts, truncation=True, max_length=MAX_LENGTH, padding=False
        )
        return [
            {
                "input_ids": batch["input_ids"][i],
                "attention_mask": batch["attention_mask"][i],
                "labels": labels[i],
            }
            for i in range(len(texts))
        ]

    train_rows = encode(read_jsonl(request["train_file"]))
    validation_rows = encode(read_jsonl(request["validation_file"]))

    def compute_metrics(eval_pred):
        logits, labels = eval_pred
        predictions = np.argmax(logits, axis=-1)
        return {"accuracy": float((predictions == labels).mean())}

    early_stopping = config.get("early_stopping", {})
    use_early_stopping = bool(early_stopping.get("enabled"))
    arguments = TrainingArguments(
        output_dir=request["model_dir"],
        num_train_epochs=int(config["epochs"]),
        per_device_train_batch_size=int(config["batch_size"]),
        per_device_eval_batch_size=int(config["batch_size"]),
        learning_rate=float(config["learning_rate"]),
        weight_decay=float(config["weight_decay"]),
        seed=int(config["seed"]),
        eval_strategy="epoch",
        logging_strategy="epoch",
        save_strategy="epoch",
        save_total_limit=2,
        load_best_model_at_end=use_early_stopping,
        metric_for_best_model="eval_loss",
        greater_is_better=False,
        report_to=[],
        use_cpu=request.get("device", "cpu") == "cpu",
    )
    callbacks = []
    if use_early_stopping:
        callbacks.append(
            EarlyStoppingCallback(
                early_stopping_patience=int(early_stopping.get("patience", 2))
            )
        )

    trainer = Trainer(
        model=model,
        args=arguments,
        train_dataset=train_rows,
        eval_dataset=validation_rows,
        processing_class=tokenizer,
        compute_metrics=compute_metrics,
        callbacks=callbacks,
    )
    trainer.train()

    # Collate the per-epoch history into bridge events.
    train_loss_by_epoch = {}
    eval_by_epoch = {}
    for entry in trainer.state.log_history:
        epoch = entry.get("epoch")
        if epoch is None:
            continue
        epoch = int(round(epoch))
        if "loss" in entry:
            train_loss_by_epoch[epoch] = entry["loss"]
        if "eval_loss" in entry:
            eval_by_epoch[epoch] = (
                entry["eval_loss"],
                entry.get("eval_accuracy", 0.0),
            )

    best_epoch = None
    best_loss = None
    for epoch in sorted(eval_by_epoch):
        eval_loss, eval_accuracy = eval_by_epoch[epoch]
        emit(
            {
                "event": "epoch",
                "epoch": epoch,
                "train_loss": finite_or_none(train_loss_by_epoch.get(epoch, eval_loss)),
                "validation_loss": finite_or_none(eval_loss),
                "validation_accuracy": float(eval_accuracy),
            }
        )
        if math.isfinite(eval_loss) and (best_loss is None or eval_loss < best_loss):
            best_loss = eval_loss
            best_epoch = epoch

    if not eval_by_epoch:
        fail("trainer produced no evaluation history")

    selected_epoch = best_epoch if use_early_stopping else max(eval_by_epoch)
    trainer.save_model(request["model_dir"])
    tokenizer.save_pretrained(request["model_dir"])
    with open(f"{request['model_dir']}/bridge_meta.json", "w", encoding="utf-8") as handle:
        json.dump({"device": request.get("device", "cpu")}, handle)

    emit(
        {
            "event": "trained",
            "model_dir": request["model_dir"],
            "selected_epoch": int(selected_epoch or 1),
        }
    )


def run_predict(request):
    import torch
    from transformers import AutoModelForSequenceClassification, AutoTokenizer

    model_dir = request["model_dir"]
    tokenizer = AutoTokenizer.from_pretrained(model_dir)
    model = AutoModelForSequenceClassification.from_pretrained(model_dir)
    try:
        with open(f"{model_dir}/bridge_meta.json", encoding="utf-8") as handle:
            device = json.load(handle).get("device", "cpu")
    except OSError:
        device = "cpu"
    model.to(device)
    model.eval()

    texts = [row["text"] for row in read_jsonl(request["texts_file"])]
    batch_size = 32
    with open(request["output_file"], "w", encoding="utf-8") as out:
        for start in range(0, len(texts), batch_size):
            chunk = texts[start : start + batch_size]
            batch = tokenizer(
                chunk,
                truncation=True,
                max_length=MAX_LENGTH,
                padding=True,
                return_tensors="pt",
            ).to(device)
            with torch.no_grad():
                logits = model(**batch).logits
            probabilities = torch.softmax(logits, dim=-1).cpu().tolist()
            for row in probabilities:
                out.write(json.dumps({"probabilities": row}) + "\n")
    emit({"event": "predicted", "count": len(texts)})


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--request", required=True, help="request json path")
    args = parser.parse_args()

    try:
        with open(args.request, encoding="utf-8") as handle:
            request = json.load(handle)
    except (OSError, json.JSONDecodeError) as error:
        fail(f"cannot read request: {error}")

    if request.get("schema_version") != 1:
        fail(f"unsupported schema_version {request.get('schema_version')}")

    mode = request.get("mode")
    try:
        if mode == "train":
            run_train(request)
        elif mode == "predict":
            run_predict(request)
        else:
            fail(f"unknown mode {mode!r}")
    except Exception as error:  # surface everything as a protocol error
        fail(error)


if __name__ == "__main__":
    main()
