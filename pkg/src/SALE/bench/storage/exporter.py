from typing import Any, Dict, Optional, Sequence, Union
from datetime import datetime
import json
import csv
from peewee import Query
from numpy import ndarray, generic


def default_format(o: Any):
    if isinstance(o, datetime):
        return o.isoformat()
    elif isinstance(o, ndarray):
        return o.tolist()
    elif isinstance(o, generic):
        return o.item()


class Exporter:

    @classmethod
    def export_json(cls, filename: str, query: Union[Dict[str, Any], Query]):

        with open(filename, 'w') as file:
            json.dump(query, file, default=default_format)

    @classmethod
    def export_csv(cls, filename: str, query: Query, header: Optional[Sequence[str]] = None):
        """
        Write the rows of a query, preceded by the given header or by the query column names.

        :param filename: Path of the CSV file.
        :param query: Tuples query.
        :param header: Explicit header row.
        """

        with open(filename, 'w', newline='') as file:
            writer = csv.writer(file, lineterminator='\n')
            t = query.execute()
            t.initialize()
            if header is not None:
                writer.writerow(header)
            elif getattr(t, 'columns', None):
                writer.writerow([column for column in t.columns])
            for row in t:
                writer.writerow(row)
