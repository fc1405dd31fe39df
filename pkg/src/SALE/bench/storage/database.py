from typing import Union, List, Type, Dict, Tuple, Optional, Any, Callable, Sequence
from os import remove, makedirs
from os.path import exists, join, splitext
from logging import getLogger
from datetime import datetime
from playhouse.migrate import SqliteDatabase
from playhouse.reflection import Introspector, SqliteMetadata
from playhouse.signals import Signal, post_save
import numpy as np

from SALE.bench.storage.tables import RecordTable, StoringTable, ExchangeTable
from SALE.bench.storage.numpy_field import NumpyField
from SALE.bench.storage.exporter import Exporter

FieldType = Union[Tuple[str, Type], Tuple[str, Type, Any]]
logger = getLogger('SALE.bench')


def python_value(value: Any) -> Any:
    """
    Plain Python scalar for numpy scalars, unchanged value otherwise.
    """

    return value.item() if isinstance(value, np.generic) else value


class _NumpyMetadata(SqliteMetadata):

    def __init__(self, database):
        super().__init__(database)
        self.column_map['numpy'] = NumpyField


class RecordDatabase:

    def __init__(self,
                 database_dir: str = '',
                 database_name: str = 'records'):
        """
        SQLite file of run records. Tables are created on the fly from the records they receive: storing tables keep
        every line, exchange tables keep the latest line only.

        :param database_dir: Directory which contains the Database file.
        :param database_name: Name of the Database file.
        """

        self.__database_dir = database_dir
        self.__database_name = splitext(database_name)[0]
        self.__database: Optional[SqliteDatabase] = None
        self.__tables: Dict[str, Type[RecordTable]] = {}
        self.__signals: List[Tuple[str, Signal, str, Callable, Optional[str]]] = []

    @staticmethod
    def make_name(table_name: str) -> str:
        """
        Harmonize the Table names.

        :param table_name: Name of the Table.
        """

        return table_name[0].upper() + table_name[1:].lower() if len(table_name) > 1 else table_name.upper()

    @property
    def path(self) -> str:
        return join(self.__database_dir, f'{self.__database_name}.db')

    def new(self, remove_existing: bool = False) -> 'RecordDatabase':
        """
        Create a new Database file.

        :param remove_existing: If True, an existing file is overwritten, otherwise the new file name is indexed.
        """

        if self.__database_dir != '' and not exists(self.__database_dir):
            makedirs(self.__database_dir)
        if exists(self.path):
            if remove_existing:
                remove(self.path)
            else:
                base, index = self.__database_name, 1
                while exists(join(self.__database_dir, f'{base}({index}).db')):
                    index += 1
                self.__database_name = f'{base}({index})'
        self.__database = SqliteDatabase(self.path)
        logger.debug(f"Created the record database {self.path}")
        return self

    def load(self, show_architecture: bool = False) -> 'RecordDatabase':
        """
        Load an existing Database file and rebuild its Tables from the file schema.

        :param show_architecture: If True, the loaded Tables will be printed.
        """

        if not exists(self.path):
            raise ValueError(f"The following Database does not exist ({self.path}).")
        self.__database = SqliteDatabase(self.path)
        metadata = Introspector(_NumpyMetadata(self.__database)).introspect()
        for table_name, columns in metadata.columns.items():
            table_class = ExchangeTable if '_dt_' in columns else StoringTable
            attrs = {'__module__': __name__}
            for column in columns.values():
                if not column.primary_key:
                    attrs[column.column_name] = column.field_class(null=True)
            name = self.make_name(table_name)
            self.__tables[name] = type(name, (table_class,), attrs)
            self.__tables[name]._meta.name = name.lower()
            self.__tables[name].bind(self.__database)
        if show_architecture:
            self.print_architecture()
        return self

    def print_architecture(self) -> None:
        """
        Print the content of the Database with Table(s) and their Field(s).
        """

        print(f'\nDATABASE {self.__database_name}.db')
        print(''.join([table.description(indent=True, name=name) for name, table in self.__tables.items()]))

    def get_tables(self) -> List[str]:
        return list(self.__tables.keys())

    def get_fields(self, table_name: str) -> List[str]:
        return self.__table(table_name).fields()

    def __table(self, table_name: str) -> Type[RecordTable]:

        table_name = self.make_name(table_name)
        if table_name not in self.__tables:
            raise ValueError(f"Unknown table with name {table_name}")
        return self.__tables[table_name]

    def create_table(self,
                     table_name: str,
                     storing_table: bool = True,
                     fields: Optional[Union[FieldType, List[FieldType]]] = None) -> None:
        """
        Add a new Table to the Database.

        :param table_name: Name of the Table.
        :param storing_table: Storing (append) Table if True, exchange (latest line) Table otherwise.
        :param fields: Name(s), type(s) and default value(s) of the Field(s) of the Table.
        """

        table_name = self.make_name(table_name)
        if table_name not in self.__tables:
            table_class = StoringTable if storing_table else ExchangeTable
            self.__tables[table_name] = type(table_name, (table_class,), {'__module__': __name__})
            self.__tables[table_name]._meta.name = table_name.lower()
            self.__tables[table_name].connect(self.__database)
            if not storing_table:
                self.create_fields(table_name, ('_dt_', datetime))
        if fields is not None:
            self.create_fields(table_name, fields)

    def create_fields(self, table_name: str, fields: Union[FieldType, List[FieldType]]) -> None:
        """
        Add new Fields to a Table.

        :param table_name: Name of the Table.
        :param fields: Name(s), type(s) and default value(s) of the Field(s).
        """

        table = self.__table(table_name)
        for field in [fields] if not isinstance(fields, list) else fields:
            if field[0] not in table.fields():
                if hasattr(table, field[0]):
                    raise ValueError(f"The name '{field[0]}' is reserved in the Table '{table_name}'.")
                table.extend(field[0], field[1], '_null_' if len(field) == 2 else field[2])

    def register_post_save_signal(self, table_name: str, handler: Callable, name: Optional[str] = None) -> None:
        """
        Connect a post_save signal from a Table to a handler(table_name, data).
        """

        self.__signals.append(('post_save', post_save, self.make_name(table_name), self.__on_save(handler), name))

    @staticmethod
    def __on_save(handler: Callable):

        def signal_handler(sender, instance, **kwargs):
            handler(sender.get_name(), instance.__data__)

        return signal_handler

    def connect_signals(self) -> None:
        """
        Connect the registered signals between Tables and handlers.
        """

        for signal_type, signal, table_name, handler, name in self.__signals:
            if table_name not in self.__tables:
                logger.warning(f"Signal '{signal_type}' was not connected with Table '{table_name}' as sender since "
                               f"it was not created.")
            else:
                signal.connect(receiver=handler, sender=self.__tables[table_name], name=name)
        self.__signals = []

    def add_data(self, table_name: str, data: Dict[str, Any]) -> int:
        """
        Insert one line. The Table and its Fields are created from the data when missing.

        :param table_name: Name of the Table.
        :param data: New line of the Table.
        """

        data = {key: python_value(value) for key, value in data.items()}
        self.__prepare(table_name, {key: type(value) for key, value in data.items()})
        return self.__table(table_name).add_data(list(data.keys()), list(data.values()))

    def add_batch(self, table_name: str, batch: Dict[str, Sequence[Any]]) -> List[int]:
        """
        Insert a batch of lines given as one sequence per field.

        :param table_name: Name of the Table.
        :param batch: New lines of the Table.
        """

        if len(np.unique([len(b) for b in batch.values()])) != 1:
            raise ValueError(f"The number of samples per batch must be the same for all fields. Number of samples "
                             f"received per field: { {k: len(v) for k, v in batch.items()} }")
        batch = {key: [python_value(v) for v in values] for key, values in batch.items()}
        self.__prepare(table_name, {key: type(values[0]) for key, values in batch.items()})
        return self.__table(table_name).add_data(list(batch.keys()), list(batch.values()), batched=True)

    def __prepare(self, table_name: str, types: Dict[str, Type]) -> None:

        if self.make_name(table_name) not in self.__tables:
            self.create_table(table_name, fields=list(types.items()))
        table = self.__table(table_name)
        if undefined := [name for name in types if name not in table.fields()]:
            if table.select().count() > 0:
                raise ValueError(f"The fields {undefined} are not defined in the non-empty table {table_name}.")
            self.create_fields(table_name, [(name, types[name]) for name in undefined])

    def get_lines(self, table_name: str, fields: Optional[Sequence[str]] = None) -> Dict[str, List[Any]]:
        """
        Every line of a Table, as one list per field.

        :param table_name: Name of the Table.
        :param fields: Fields to select, all of them by default.
        """

        table = self.__table(table_name)
        columns = [getattr(table, f) for f in fields] if fields is not None else []
        query = list(table.select(*columns).order_by(table.id).dicts())
        names = list(fields) if fields is not None else table.fields()
        return {name: [line[name] for line in query] for name in names}

    def get_line(self, table_name: str, line_id: int = -1) -> Dict[str, Any]:
        """
        One line of a Table, the last one by default.
        """

        table = self.__table(table_name)
        lines = list(table.select().order_by(table.id).dicts())
        return lines[line_id]

    def nb_lines(self, table_name: str) -> int:
        return self.__table(table_name).select().count()

    def export_csv(self, table_name: str, filename: str, fields: Sequence[str],
                   header: Optional[Sequence[str]] = None) -> None:
        """
        Export selected columns of a Table, in order, to a CSV file.

        :param table_name: Name of the Table.
        :param filename: Path of the CSV file.
        :param fields: Columns to export, in order.
        :param header: Header row, the field names by default.
        """

        table = self.__table(table_name)
        query = table.select(*[getattr(table, f) for f in fields]).order_by(table.id).tuples()
        Exporter.export_csv(filename=filename, query=query, header=list(fields) if header is None else header)

    def export_json(self, table_name: str, filename: str) -> None:
        Exporter.export_json(filename=filename, query=self.get_lines(table_name))

    def close(self, erase_file: bool = False) -> None:
        """
        Close the Database.

        :param erase_file: If True, the Database file will be erased.
        """

        self.__database.close()
        if erase_file and exists(self.path):
            remove(self.path)
