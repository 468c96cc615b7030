"""Writes small synthetic FHIR R4 transaction bundles laid out like Synthea output.

Deterministic: rerunning reproduces the committed files byte for byte.
    python3 generate.py
"""

import json
import random
import uuid
from datetime import datetime, timedelta, timezone
from pathlib import Path

OUT = Path(__file__).parent
TZ = timezone(timedelta(hours=-5))


class Bundle:
    def __init__(self, seed):
        self.rng = random.Random(seed)
        self.entries = []

    def uid(self):
        return str(uuid.UUID(int=self.rng.getrandbits(128), version=4))

    def add(self, resource):
        rid = self.uid()
        resource = {"resourceType": resource.pop("resourceType"), "id": rid, **resource}
        self.entries.append(
            {
                "fullUrl": f"urn:uuid:{rid}",
                "resource": resource,
                "request": {"method": "POST", "url": resource["resourceType"]},
            }
        )
        return f"urn:uuid:{rid}"

    def dump(self, path):
        doc = {"resourceType": "Bundle", "type": "transaction", "entry": self.entries}
        path.write_text(json.dumps(doc, indent=2, ensure_ascii=False) + "\n")


def ts(dt):
    return dt.isoformat()


def concept(system, code, display, text=None):
    c = {"coding": [{"system": system, "code": code, "display": display}]}
    c["text"] = text or display
    return c


SNOMED = "http://snomed.info/sct"
LOINC = "http://loinc.org"
RXNORM = "http://www.nlm.nih.gov/research/umls/rxnorm"
CVX = "http://hl7.org/fhir/sid/cvx"
ACT = "http://terminology.hl7.org/CodeSystem/v3-ActCode"
INTERP = "http://terminology.hl7.org/CodeSystem/v3-ObservationInterpretation"

VITALS = [
    ("8310-5", "Body temperature", 36.4, 38.9, "Cel"),
    ("8867-4", "Heart rate", 58, 118, "/min"),
    ("29463-7", "Body Weight", 55.0, 95.0, "kg"),
    ("2339-0", "Glucose", 70, 190, "mg/dL"),
]

CONDITIONS = [
    ("233604007", "Pneumonia", "J18.9"),
    ("44054006", "Diabetes mellitus type 2", "E11.9"),
    ("195662009", "Acute viral pharyngitis", "J02.9"),
    ("59621000", "Essential hypertension", "I10"),
]

MEDS = [
    ("308182", "Amoxicillin 250 MG Oral Capsule", "Take 1 capsule three times daily for 10 days"),
    ("860975", "24 HR Metformin hydrochloride 500 MG Extended Release Oral Tablet", "Take 1 tablet daily with evening meal"),
    ("314076", "lisinopril 10 MG Oral Tablet", None),
]


def patient(b, given, family, birth, gender):
    return b.add(
        {
            "resourceType": "Patient",
            "meta": {"profile": ["http://hl7.org/fhir/us/core/StructureDefinition/us-core-patient"]},
            "name": [{"use": "official", "family": family, "given": given, "prefix": ["Mx."]}],
            "telecom": [{"system": "phone", "value": "555-01" + str(b.rng.randint(10, 99)), "use": "home"}],
            "gender": gender,
            "birthDate": birth,
            "address": [{"line": ["12 Example Way"], "city": "Springfield", "state": "MA", "country": "US"}],
        }
    )


def encounter(b, pref, start, cls, text, minutes=30):
    return b.add(
        {
            "resourceType": "Encounter",
            "status": "finished",
            "class": {"system": ACT, "code": cls},
            "type": [concept(SNOMED, "185349003", text)],
            "subject": {"reference": pref, "display": "Patient"},
            "period": {"start": ts(start), "end": ts(start + timedelta(minutes=minutes))},
        }
    )


def build(seed, given, family, birth, gender, visits, with_imaging):
    b = Bundle(seed)
    rng = b.rng
    pref = patient(b, given, family, birth, gender)
    start = datetime(2018, 1, 8, 9, 0, tzinfo=TZ) + timedelta(days=seed * 17)
    for v in range(visits):
        when = start + timedelta(days=90 * v + rng.randint(0, 20), minutes=15 * rng.randint(0, 20))
        cls = "EMER" if v % 3 == 2 else "AMB"
        eref = encounter(b, pref, when, cls, "Emergency room admission" if cls == "EMER" else "General examination")
        code, name, icd = CONDITIONS[(seed + v) % len(CONDITIONS)]
        cref = b.add(
            {
                "resourceType": "Condition",
                "clinicalStatus": {
                    "coding": [
                        {
                            "system": "http://terminology.hl7.org/CodeSystem/condition-clinical",
                            "code": "active" if v == visits - 1 else "resolved",
                        }
                    ]
                },
                "verificationStatus": {"coding": [{"code": "confirmed"}]},
                "code": {"coding": [{"system": SNOMED, "code": code, "display": name}, {"system": "http://hl7.org/fhir/sid/icd-10-cm", "code": icd}], "text": name},
                "subject": {"reference": pref},
                "encounter": {"reference": eref},
                "onsetDateTime": ts(when),
                "recordedDate": ts(when),
            }
        )
        obs_refs = []
        for loinc, label, lo, hi, unit in VITALS[: 2 + v % 3]:
            value = round(rng.uniform(lo, hi), 1)
            flag = "H" if value > lo + (hi - lo) * 0.8 else ("L" if value < lo + (hi - lo) * 0.1 else "N")
            obs = {
                "resourceType": "Observation",
                "status": "final",
                "category": [{"coding": [{"code": "vital-signs"}]}],
                "code": concept(LOINC, loinc, label),
                "subject": {"reference": pref},
                "encounter": {"reference": eref},
                "valueQuantity": {"value": value, "unit": unit, "system": "http://unitsofmeasure.org", "code": unit},
                "interpretation": [{"coding": [{"system": INTERP, "code": flag}]}],
                "issued": ts(when + timedelta(minutes=5)),
            }
            # Synthea occasionally omits effectiveDateTime; keep one such gap per bundle.
            if not (v == 1 and loinc == "8867-4"):
                obs["effectiveDateTime"] = ts(when + timedelta(minutes=2))
            else:
                del obs["issued"]
            obs_refs.append(b.add(obs))
        b.add(
            {
                "resourceType": "Observation",
                "status": "final",
                "code": concept(LOINC, "72166-2", "Tobacco smoking status"),
                "subject": {"reference": pref},
                "encounter": {"reference": eref},
                "effectiveDateTime": ts(when + timedelta(minutes=3)),
                "valueCodeableConcept": concept(SNOMED, "266919005", "Never smoker"),
            }
        )
        b.add(
            {
                "resourceType": "DiagnosticReport",
                "status": "final",
                "code": concept(LOINC, "51990-0", "Basic metabolic panel"),
                "subject": {"reference": pref},
                "encounter": {"reference": eref},
                "effectiveDateTime": ts(when + timedelta(minutes=10)),
                "issued": ts(when + timedelta(minutes=40)),
                "result": [{"reference": r} for r in obs_refs],
            }
        )
        rx, med, dose = MEDS[(seed + v) % len(MEDS)]
        mr = {
            "resourceType": "MedicationRequest",
            "status": "active" if v == visits - 1 else "stopped",
            "intent": "order",
            "medicationCodeableConcept": concept(RXNORM, rx, med),
            "subject": {"reference": pref},
            "encounter": {"reference": eref},
            "authoredOn": ts(when + timedelta(minutes=20)),
            "reasonReference": [{"reference": cref}],
        }
        if dose:
            mr["dosageInstruction"] = [{"sequence": 1, "text": dose, "timing": {"repeat": {"frequency": 1, "period": 1, "periodUnit": "d"}}}]
        else:
            mr["dosageInstruction"] = [{"sequence": 1, "asNeededBoolean": False, "doseAndRate": [{"doseQuantity": {"value": 1}}]}]
        b.add(mr)
        b.add(
            {
                "resourceType": "Procedure",
                "status": "completed",
                "code": concept(SNOMED, "430193006", "Medication Reconciliation (procedure)"),
                "subject": {"reference": pref},
                "encounter": {"reference": eref},
                "performedPeriod": {"start": ts(when + timedelta(minutes=12)), "end": ts(when + timedelta(minutes=18))}
                if v % 2
                else None,
                "performedDateTime": None if v % 2 else ts(when + timedelta(minutes=12)),
                "outcome": {"text": "Successful"},
            }
        )
        # drop the None placeholders
        proc = b.entries[-1]["resource"]
        for k in [k for k, val in proc.items() if val is None]:
            del proc[k]
        b.add(
            {
                "resourceType": "DocumentReference",
                "status": "current",
                "type": concept(LOINC, "34117-2", "History and physical note"),
                "subject": {"reference": pref},
                "date": ts(when + timedelta(minutes=30)),
                "content": [{"attachment": {"contentType": "text/plain", "data": "Tm90ZXMgZm9yIHZpc2l0Lg=="}}],
                "context": {"encounter": [{"reference": eref}], "period": {"start": ts(when)}},
            }
        )
        claim = b.add(
            {
                "resourceType": "Claim",
                "status": "active",
                "type": {"coding": [{"code": "professional"}]},
                "patient": {"reference": pref},
                "billablePeriod": {"start": ts(when), "end": ts(when + timedelta(minutes=30))},
                "created": ts(when + timedelta(minutes=30)),
                "item": [{"sequence": 1, "productOrService": {"text": "Encounter"}, "encounter": [{"reference": eref}]}],
                "total": {"value": round(rng.uniform(80, 400), 2), "currency": "USD"},
            }
        )
        b.add(
            {
                "resourceType": "ExplanationOfBenefit",
                "status": "active",
                "patient": {"reference": pref},
                "claim": {"reference": claim},
                "created": ts(when + timedelta(minutes=30)),
                "billablePeriod": {"start": ts(when), "end": ts(when + timedelta(minutes=30))},
                "item": [{"sequence": 1, "encounter": [{"reference": eref}]}],
            }
        )
        if v == 0:
            b.add(
                {
                    "resourceType": "Immunization",
                    "status": "completed",
                    "vaccineCode": concept(CVX, "140", "Influenza, seasonal, injectable, preservative free"),
                    "patient": {"reference": pref},
                    "encounter": {"reference": eref},
                    "occurrenceDateTime": ts(when + timedelta(minutes=25)),
                    "primarySource": True,
                }
            )
            b.add(
                {
                    "resourceType": "CarePlan",
                    "status": "active",
                    "intent": "order",
                    "category": [concept(SNOMED, "736285004", "Hyperlipidemia clinical management plan")],
                    "subject": {"reference": pref},
                    "encounter": {"reference": eref},
                    "period": {"start": ts(when)},
                }
            )
            b.add(
                {
                    "resourceType": "CareTeam",
                    "status": "active",
                    "subject": {"reference": pref},
                    "encounter": {"reference": eref},
                    "period": {"start": ts(when)},
                    "participant": [{"role": [{"text": "Patient"}], "member": {"reference": pref}}],
                }
            )
            b.add(
                {
                    "resourceType": "AllergyIntolerance",
                    "clinicalStatus": {"coding": [{"code": "active"}]},
                    "code": concept(SNOMED, "300916003", "Latex allergy"),
                    "patient": {"reference": pref},
                    "recordedDate": ts(when),
                }
            )
            b.add(
                {
                    "resourceType": "Goal",
                    "lifecycleStatus": "active",
                    "description": {"text": "Maintain blood pressure below 140/90 mm[Hg]"},
                    "subject": {"reference": pref},
                }
            )
        if with_imaging and v == 1:
            b.add(
                {
                    "resourceType": "ImagingStudy",
                    "status": "available",
                    "subject": {"reference": pref},
                    "encounter": {"reference": eref},
                    "started": ts(when + timedelta(minutes=8)),
                    "numberOfSeries": 1,
                    "numberOfInstances": 1,
                    "series": [
                        {
                            "uid": "1.2.840.99999999." + str(seed) + ".1",
                            "modality": {"system": "http://dicom.nema.org/resources/ontology/DCM", "code": "DX"},
                            "bodySite": {"system": SNOMED, "code": "51185008", "display": "Thoracic structure (body structure)"},
                        }
                    ],
                }
            )
            b.add(
                {
                    "resourceType": "Device",
                    "status": "active",
                    "type": concept(SNOMED, "337414009", "Blood glucose meters (physical object)"),
                    "patient": {"reference": pref},
                    "manufactureDate": ts(when - timedelta(days=400)),
                }
            )
            b.add(
                {
                    "resourceType": "SupplyDelivery",
                    "status": "completed",
                    "patient": {"reference": pref},
                    "type": {"coding": [{"code": "device"}]},
                    "suppliedItem": {"quantity": {"value": 1}},
                    "occurrenceDateTime": ts(when + timedelta(hours=2)),
                }
            )
    targets = [{"reference": e["fullUrl"]} for e in b.entries]
    b.add(
        {
            "resourceType": "Provenance",
            "target": targets,
            "recorded": ts(start + timedelta(days=90 * visits)),
            "agent": [{"type": {"text": "Performer"}, "who": {"display": "Synthetic Clinic"}}],
        }
    )
    return b


def main():
    build(1, ["Ada", "Maren"], "Okafor", "1961-04-12", "female", 5, True).dump(OUT / "ada_okafor.json")
    build(2, ["Bruno"], "Lindqvist", "1988-11-30", "male", 4, False).dump(OUT / "bruno_lindqvist.json")
    build(3, ["Chen", "Li"], "Moreau", "2009-07-02", "female", 6, True).dump(OUT / "chen_moreau.json")


if __name__ == "__main__":
    main()
